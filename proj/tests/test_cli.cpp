#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "oracles.hpp"

using namespace ssmstyler;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::vector<std::string> lines() const {
    std::vector<std::string> v;
    std::istringstream in(out);
    for (std::string l; std::getline(in, l);) v.push_back(l);
    return v;
  }
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(SSMSTYLER_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string dump(const ParamStore& p) {
  std::ostringstream out;
  save_checkpoint(p, out);
  return out.str();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    char tmpl[] = "/tmp/ssmstyler-cli-XXXXXX";
    dir_ = mkdtemp(tmpl);
    // short run so transfer has non-init weights to work with
    ASSERT_EQ(cli("train --epochs 1 --n-per-style 1 --quiet --seed 4 --out " + q(dir_ / "trained.ckpt")).code, 0);
    write_wav_file(generate_toy_corpus(77, 1)[0].waveform, (dir_ / "in.wav").string());
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }
  static std::string q(const fs::path& p) { return "'" + p.string() + "'"; }
  static fs::path dir_;
};
fs::path Cli::dir_;

}  // namespace

TEST_F(Cli, TrainZeroEpochsWritesInit) {
  const auto r = cli("train --epochs 0 --seed 12 --out " + q(dir_ / "init.ckpt"));
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(slurp(dir_ / "init.ckpt"), dump(init_params(12, ModelConfig::defaults())));
  EXPECT_NE(r.out.find("summary steps=0"), std::string::npos);
}

TEST_F(Cli, TrainTwiceIsByteIdentical) {
  ASSERT_EQ(cli("train --epochs 1 --n-per-style 1 --quiet --seed 4 --out " + q(dir_ / "again.ckpt")).code, 0);
  EXPECT_EQ(slurp(dir_ / "again.ckpt"), slurp(dir_ / "trained.ckpt"));
}

TEST_F(Cli, TrainLogsOneLinePerStep) {
  const auto r = cli("train --epochs 1 --n-per-style 1 --seed 4 --out " + q(dir_ / "logged.ckpt"));
  ASSERT_EQ(r.code, 0);
  int steps = 0;
  for (const auto& l : r.lines()) steps += l.rfind("step=", 0) == 0;
  EXPECT_EQ(steps, 4);
  EXPECT_NE(r.out.find("summary steps=4 "), std::string::npos);
}

TEST_F(Cli, TrainUnwritablePathExits2) {
  EXPECT_EQ(cli("train --epochs 0 --out /nonexistent-dir/x.ckpt").code, 2);
  EXPECT_EQ(cli("train --epochs 0 --lambda 1,1 --out " + q(dir_ / "l.ckpt")).code, 2);
  EXPECT_EQ(cli("train --epochs 0 --variant nope --out " + q(dir_ / "l.ckpt")).code, 2);
}

TEST_F(Cli, GradcheckEpsilonOutOfRangeExits2) {
  EXPECT_EQ(cli("gradcheck --epsilon 1e-1").code, 2);
  EXPECT_EQ(cli("gradcheck --epsilon 1e-9").code, 2);
}

TEST_F(Cli, GradcheckDefaultPassesAndCoversPrefixes) {
  const auto r = cli("gradcheck");
  ASSERT_EQ(r.code, 0) << r.out;
  std::set<std::string> prefixes;
  std::size_t rows = 0;
  for (const auto& l : r.lines()) {
    if (l.find("analytic=") == std::string::npos) continue;
    ++rows;
    prefixes.insert(l.substr(0, l.find('.')));
  }
  EXPECT_EQ(rows, 200u);
  for (const char* pre : {"enc", "gate", "attn", "fuse", "dec", "phi_audio", "phi_text"})
    EXPECT_TRUE(prefixes.count(pre)) << pre;
  const auto last = r.lines().back();
  EXPECT_EQ(last.rfind("gradcheck samples=200 epsilon=1e-05 max_rel_error=", 0), 0u) << last;
  EXPECT_NE(last.find("PASS"), std::string::npos);
}

TEST_F(Cli, BenchJsonOneObjectPerLine) {
  const auto r = cli("bench --json --seq-lens 16,64 --repeats 3");
  ASSERT_EQ(r.code, 0);
  std::set<std::string> variants;
  std::size_t n = 0;
  for (const auto& l : r.lines()) {
    const auto j = nlohmann::json::parse(l);
    ASSERT_TRUE(j.is_object());
    variants.insert(j.at("variant").get<std::string>());
    EXPECT_GT(j.at("wall_time_s").get<double>(), 0.0);
    EXPECT_GT(j.at("param_count").get<std::size_t>(), 0u);
    EXPECT_TRUE(j.at("seq_len") == 16 || j.at("seq_len") == 64);
    EXPECT_FALSE(j.at("parallel").get<bool>());
    ++n;
  }
  EXPECT_EQ(n, 8u);
  EXPECT_TRUE(variants.count(kQuadraticReference));
  EXPECT_TRUE(variants.count("transformer_ssm"));
}

TEST_F(Cli, BenchTablePrintsLinearAndQuadraticRows) {
  const auto r = cli("bench --seq-lens 16,32 --repeats 3 --parallel --threads 2");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("pure_ssm"), std::string::npos);
  EXPECT_NE(r.out.find(kQuadraticReference), std::string::npos);
  EXPECT_NE(r.out.find("yes"), std::string::npos);
  EXPECT_EQ(cli("bench --seq-lens 64,16").code, 2);
  EXPECT_EQ(cli("bench --seq-lens 16,x").code, 2);
}

TEST_F(Cli, TransferLengthAndPromptSensitivity) {
  const auto a = cli("transfer --ckpt " + q(dir_ / "trained.ckpt") + " --in " + q(dir_ / "in.wav") +
                     " --prompt excited --out " + q(dir_ / "a.wav"));
  ASSERT_EQ(a.code, 0);
  EXPECT_NE(a.out.find("style_similarity="), std::string::npos);
  const auto b = cli("transfer --ckpt " + q(dir_ / "trained.ckpt") + " --in " + q(dir_ / "in.wav") +
                     " --prompt soothing --out " + q(dir_ / "b.wav"));
  ASSERT_EQ(b.code, 0);
  const auto wa = read_wav_file((dir_ / "a.wav").string());
  const std::size_t T = ConvSpec::default_encoder().output_length(4000);
  EXPECT_EQ(wa.samples.size(), T * 16);
  EXPECT_EQ(wa.sample_rate_hz, 8000);
  EXPECT_NEAR(double(wa.samples.size()) / wa.sample_rate_hz, double(T) * 16 / 8000, 1e-12);
  EXPECT_NE(slurp(dir_ / "a.wav"), slurp(dir_ / "b.wav"));
}

TEST_F(Cli, TransferMatchesLibrary) {
  ASSERT_EQ(cli("transfer --ckpt " + q(dir_ / "trained.ckpt") + " --in " + q(dir_ / "in.wav") +
                " --prompt 'a mysterious voice' --out " + q(dir_ / "m.wav"))
                .code,
            0);
  const auto params = load_checkpoint_file((dir_ / "trained.ckpt").string());
  const auto in = read_wav_file((dir_ / "in.wav").string());
  const auto r = stylize(ModelConfig::defaults(), params, in,
                         tokenize("a mysterious voice", Vocabulary::builtin()), FusionVariant::transformer_ssm);
  std::ostringstream expect;
  write_wav(r.waveform, expect);
  EXPECT_EQ(slurp(dir_ / "m.wav"), expect.str());
}

TEST_F(Cli, TransferRejectsStereoAndEmptyPrompt) {
  {
    // 44-byte header, 2 channels
    std::ofstream out(dir_ / "stereo.wav", std::ios::binary);
    auto u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    auto u16 = [&](std::uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };
    out.write("RIFF", 4);
    u32(36 + 8);
    out.write("WAVEfmt ", 8);
    u32(16);
    u16(1);
    u16(2);
    u32(8000);
    u32(8000 * 4);
    u16(4);
    u16(16);
    out.write("data", 4);
    u32(8);
    u32(0);
    u32(0);
  }
  const std::string base = "transfer --ckpt " + q(dir_ / "trained.ckpt") + " --out " + q(dir_ / "x.wav");
  EXPECT_EQ(cli(base + " --in " + q(dir_ / "stereo.wav") + " --prompt excited").code, 2);
  EXPECT_EQ(cli(base + " --in " + q(dir_ / "in.wav") + " --prompt ''").code, 2);
  EXPECT_EQ(cli(base + " --in " + q(dir_ / "missing.wav") + " --prompt excited").code, 2);
  EXPECT_EQ(cli("transfer --ckpt " + q(dir_ / "in.wav") + " --in " + q(dir_ / "in.wav") + " --prompt excited").code, 2);
  EXPECT_EQ(cli("transfer --prompt excited").code, 2);
}

TEST_F(Cli, AblateThreeCheckpointsThreeRows) {
  const auto r = cli("ablate --heldout 4 --json --ckpts " + dir_.string() + "/trained.ckpt," + dir_.string() +
                     "/trained.ckpt," + dir_.string() + "/trained.ckpt");
  ASSERT_EQ(r.code, 0);
  const auto lines = r.lines();
  ASSERT_EQ(lines.size(), 3u);
  const char* labels[] = {"Pure Transformer (no SSM)", "Pure SSM (no attention)", "Transformer-SSM (Ours)"};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto j = nlohmann::json::parse(lines[i]);
    EXPECT_EQ(j.at("label").get<std::string>(), labels[i]);
    EXPECT_NEAR(j.at("margin").get<double>(),
                j.at("style_similarity").get<double>() - j.at("mismatched_similarity").get<double>(), 1e-12);
  }
  const auto table = cli("ablate --heldout 4 --ckpts " + dir_.string() + "/trained.ckpt," + dir_.string() +
                         "/trained.ckpt," + dir_.string() + "/trained.ckpt");
  ASSERT_EQ(table.code, 0);
  for (const char* l : labels) EXPECT_NE(table.out.find(l), std::string::npos) << l;
  EXPECT_EQ(cli("ablate --ckpts " + dir_.string() + "/trained.ckpt").code, 2);
}

TEST_F(Cli, GenCorpusWritesIndex) {
  ASSERT_EQ(cli("gen-corpus --n-per-style 1 --out-dir " + q(dir_ / "corpus")).code, 0);
  const auto index = slurp(dir_ / "corpus" / "index.tsv");
  EXPECT_EQ(std::count(index.begin(), index.end(), '\n'), 5);
  const auto w = read_wav_file((dir_ / "corpus" / "utt0000.wav").string());
  EXPECT_EQ(w.samples.size(), 4000u);
}

TEST_F(Cli, UsageErrorsExit2) {
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("train --epochs notanumber").code, 2);
}
