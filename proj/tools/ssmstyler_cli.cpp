// ssmstyler command-line driver: train, transfer, gradcheck, bench, ablate,
// gen-corpus. Exit codes: 0 success, 1 numeric failure, 2 usage or I/O error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ssmstyler/ssmstyler.hpp"

namespace ss = ssmstyler;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNumeric = 1;
constexpr int kExitUsage = 2;

ss::LossWeights parse_lambdas(const std::string& s) {
  std::vector<double> v;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ss::InvalidArgument("bad --lambda component '" + item + "'");
    }
  }
  if (v.size() != 3) throw ss::InvalidArgument("--lambda expects content,style,smooth");
  ss::LossWeights w{v[0], v[1], v[2]};
  w.validate();
  return w;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::uint64_t seed = 0;
  std::size_t epochs = 5;
  std::size_t n_per_style = 10;
  std::string out = "model.ckpt";
  std::string lambda = "1,1,0.01";
  std::string variant = "transformer_ssm";
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  ss::TrainOptions opts;
  opts.seed = a.seed;
  opts.epochs = a.epochs;
  opts.weights = parse_lambdas(a.lambda);
  opts.variant = ss::parse_variant(a.variant);
  {
    // Fail on an unwritable path before spending time on training.
    std::ofstream probe(a.out, std::ios::binary | std::ios::app);
    if (!probe) throw ss::IoError("cannot open '" + a.out + "' for writing");
  }
  const auto corpus = ss::generate_toy_corpus(a.seed, a.n_per_style);
  const auto result = ss::train(corpus, ss::ModelConfig::defaults(), opts,
                                [&](std::size_t step, const ss::LossReport& r) {
                                  if (!a.quiet) std::cout << ss::format_loss_line(step, r) << '\n';
                                });
  ss::save_checkpoint_file(result.params, a.out);
  if (!result.history.empty()) {
    const double first = result.history.front().total, last = result.history.back().total;
    std::printf("summary steps=%zu initial_total=%.6g final_total=%.6g ratio=%.6g\n",
                result.history.size(), first, last, last / first);
  } else {
    std::printf("summary steps=0\n");
  }
  std::printf("wrote %s\n", a.out.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TransferArgs {
  std::string ckpt = "model.ckpt";
  std::string in;
  std::string prompt;
  std::string out = "styled.wav";
  std::string variant = "transformer_ssm";
};

int cmd_transfer(const TransferArgs& a) {
  const auto cfg = ss::ModelConfig::defaults();
  const ss::ParamStore params = ss::load_checkpoint_file(a.ckpt);
  ss::check_params_match(params, cfg);
  const ss::Waveform wav = ss::read_wav_file(a.in);
  const auto tokens = ss::tokenize(a.prompt, ss::Vocabulary::builtin());
  const auto r = ss::stylize(cfg, params, wav, tokens, ss::parse_variant(a.variant));
  ss::write_wav_file(r.waveform, a.out);
  std::printf("wrote %s samples=%zu sample_rate=%d\n", a.out.c_str(), r.waveform.samples.size(),
              r.waveform.sample_rate_hz);
  std::printf("style_similarity=%.6f\n", ss::style_similarity(r.audio_emb, r.text_emb));
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct GradcheckArgs {
  std::uint64_t seed = 0;
  std::size_t samples = 200;
  double epsilon = 1e-5;
  bool quiet = false;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  if (!(a.epsilon >= 1e-7 && a.epsilon <= 1e-3))
    throw ss::InvalidArgument("--epsilon must lie in [1e-7, 1e-3]");
  const auto cfg = ss::ModelConfig::tiny();
  ss::ToyCorpusConfig cc;
  cc.samples = 512;
  cc.encoder = cfg.encoder;
  const auto ex = ss::generate_toy_corpus(a.seed, 1, cc).front();
  const auto tokens = ss::tokenize(ex.prompt + " with calm tone", ss::Vocabulary::builtin());
  ss::ParamStore params = ss::init_params(a.seed, cfg);
  const ss::LossWeights w{};
  const auto coupling = ss::DecoderCoupling::joint;
  auto loss = [&](const ss::ParamStore& p) {
    return ss::forward_pass(cfg, p, ex.waveform, tokens, ex.frame_labels,
                            ss::FusionVariant::transformer_ssm, w, coupling)
        .objective(coupling);
  };
  const auto fp = ss::forward_pass(cfg, params, ex.waveform, tokens, ex.frame_labels,
                                   ss::FusionVariant::transformer_ssm, w, coupling);
  params.zero_grad();
  ss::backward_pass(cfg, fp, params, ex.waveform, tokens, ex.frame_labels, w, coupling);
  const auto report = ss::finite_diff_check(loss, params, a.epsilon, a.samples, a.seed);
  for (const auto& s : report.samples)
    if (!a.quiet)
      std::printf("%-20s[%5zu] analytic=% .10e numeric=% .10e rel_err=%.3e\n", s.name.c_str(),
                  s.index, s.analytic, s.numeric, s.rel_error);
  const bool ok = report.max_rel_error < 1e-4;
  std::printf("gradcheck samples=%zu epsilon=%g max_rel_error=%.3e %s\n", report.samples.size(),
              a.epsilon, report.max_rel_error, ok ? "PASS" : "FAIL");
  return ok ? kExitOk : kExitNumeric;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string seq_lens = "512,4096";
  std::size_t repeats = 5;
  bool json = false;
  bool parallel = false;
  unsigned threads = 0;
  std::size_t fft_size = 16;
  std::size_t channels = 2;
};

void print_bench(const std::vector<ss::BenchResult>& rows, bool json) {
  if (!json) {
    std::cout << ss::format_bench_table(rows);
    return;
  }
  for (const auto& r : rows) {
    nlohmann::json j = {{"variant", r.variant},
                        {"seq_len", r.seq_len},
                        {"wall_time_s", r.wall_time_s},
                        {"param_count", r.param_count},
                        {"parallel", r.parallel}};
    std::cout << j.dump() << '\n';
  }
}

int cmd_bench(const BenchArgs& a) {
  std::vector<std::size_t> lens;
  for (const auto& s : split_list(a.seq_lens)) {
    try {
      lens.push_back(std::stoul(s));
    } catch (const std::exception&) {
      throw ss::InvalidArgument("bad sequence length '" + s + "'");
    }
  }
  ss::BenchOptions opts;
  opts.repeats = a.repeats;
  opts.model.stft = {a.fft_size, a.fft_size / 4, ss::WindowKind::hann};
  opts.model.encoder.layers.back().out_channels = a.channels;
  opts.model.decoder.layers.front().in_channels = a.channels;
  opts.model.validate();
  if (!a.json)
    std::printf("grid: bins=%zu channels=%zu d_model=%zu d_head=%zu repeats=%zu\n", opts.model.bins(),
                opts.model.latent_dim(), opts.model.d_model(), opts.model.d_head, a.repeats);
  print_bench(ss::run_scaling_bench(lens, opts), a.json);
  if (a.parallel) {
    opts.exec = a.threads ? ss::ExecPolicy{a.threads} : ss::ExecPolicy::hardware();
    if (!a.json) std::printf("parallel paths, threads=%u\n", opts.exec.threads);
    print_bench(ss::run_scaling_bench(lens, opts), a.json);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct AblateArgs {
  std::string ckpts;
  std::uint64_t seed = 0;
  std::size_t epochs = 5;
  std::size_t n_per_style = 10;
  std::size_t heldout = 32;
  bool json = false;
};

int cmd_ablate(const AblateArgs& a) {
  const auto cfg = ss::ModelConfig::defaults();
  const auto paths = split_list(a.ckpts);
  if (!paths.empty() && paths.size() != 3)
    throw ss::InvalidArgument(
        "--ckpts takes three paths: pure_transformer,pure_ssm,transformer_ssm");
  std::vector<ss::ParamStore> stores;
  if (paths.empty()) {
    const auto corpus = ss::generate_toy_corpus(a.seed, a.n_per_style);
    for (ss::FusionVariant v : ss::kAllVariants) {
      ss::TrainOptions opts;
      opts.seed = a.seed;
      opts.epochs = a.epochs;
      opts.variant = v;
      stores.push_back(ss::train(corpus, cfg, opts).params);
    }
  } else {
    for (const auto& p : paths) {
      stores.push_back(ss::load_checkpoint_file(p));
      ss::check_params_match(stores.back(), cfg);
    }
  }
  std::vector<ss::AblationEntry> entries;
  for (std::size_t i = 0; i < 3; ++i) entries.push_back({ss::kAllVariants[i], &stores[i]});
  const std::size_t per_style = (a.heldout + 3) / 4;
  const auto heldout = ss::generate_toy_corpus(a.seed + 1000, per_style);
  const auto rows = ss::run_ablation(cfg, entries, heldout);
  if (a.json) {
    for (const auto& r : rows) {
      nlohmann::json j = {{"variant", std::string(ss::variant_name(r.variant))},
                          {"label", std::string(ss::variant_label(r.variant))},
                          {"style_similarity", r.style_similarity},
                          {"mismatched_similarity", r.mismatched_similarity},
                          {"margin", r.margin()},
                          {"content_accuracy", r.content_accuracy}};
      std::cout << j.dump() << '\n';
    }
  } else {
    std::printf("held-out examples: %zu\n", heldout.size());
    std::cout << ss::format_ablation_table(rows);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct CorpusArgs {
  std::uint64_t seed = 0;
  std::size_t n_per_style = 2;
  std::string out_dir = "corpus";
};

int cmd_gen_corpus(const CorpusArgs& a) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec) throw ss::IoError("cannot create '" + a.out_dir + "': " + ec.message());
  const auto corpus = ss::generate_toy_corpus(a.seed, a.n_per_style);
  std::ofstream index(fs::path(a.out_dir) / "index.tsv");
  if (!index) throw ss::IoError("cannot write index.tsv in '" + a.out_dir + "'");
  index << "file\tstyle\tprompt\tsegment_labels\n";
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& ex = corpus[i];
    char name[32];
    std::snprintf(name, sizeof name, "utt%04zu.wav", i);
    ss::write_wav_file(ex.waveform, (fs::path(a.out_dir) / name).string());
    index << name << '\t' << ss::kStyleWords[static_cast<std::size_t>(ex.style_id)] << '\t'
          << ex.prompt << '\t';
    for (std::size_t k = 0; k < ex.segment_labels.size(); ++k)
      index << (k ? "," : "") << ex.segment_labels[k];
    index << '\n';
  }
  std::printf("wrote %zu examples to %s\n", corpus.size(), a.out_dir.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"restyle speech from a text prompt with a spectral recurrence layer"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "train on the synthetic style corpus");
  t->add_option("--seed", train.seed);
  t->add_option("--epochs", train.epochs);
  t->add_option("--n-per-style", train.n_per_style)->check(CLI::PositiveNumber);
  t->add_option("--out", train.out, "checkpoint path");
  t->add_option("--lambda", train.lambda, "content,style,smooth weights");
  t->add_option("--variant", train.variant)
      ->check(CLI::IsMember({"transformer_ssm", "pure_transformer", "pure_ssm"}));
  t->add_flag("--quiet", train.quiet, "suppress per-step lines");

  TransferArgs transfer;
  auto* x = app.add_subcommand("transfer", "restyle a mono PCM16 WAV with a text prompt");
  x->add_option("--ckpt", transfer.ckpt);
  x->add_option("--in", transfer.in)->required();
  x->add_option("--prompt", transfer.prompt)->required();
  x->add_option("--out", transfer.out);
  x->add_option("--variant", transfer.variant)
      ->check(CLI::IsMember({"transformer_ssm", "pure_transformer", "pure_ssm"}));

  GradcheckArgs grad;
  auto* g = app.add_subcommand("gradcheck", "finite-difference audit of every analytic gradient");
  g->add_option("--seed", grad.seed);
  g->add_option("--samples", grad.samples);
  g->add_option("--epsilon", grad.epsilon);
  g->add_flag("--quiet", grad.quiet);

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "time the fusion layer against a quadratic reference");
  b->add_option("--seq-lens", bench.seq_lens, "comma-separated frame counts");
  b->add_option("--repeats", bench.repeats);
  b->add_flag("--json", bench.json);
  b->add_flag("--parallel", bench.parallel, "also run the multi-threaded paths");
  b->add_option("--threads", bench.threads);
  b->add_option("--fft-size", bench.fft_size);
  b->add_option("--channels", bench.channels)->check(CLI::PositiveNumber);

  AblateArgs ablate;
  auto* a = app.add_subcommand("ablate", "ablation table over the three fusion variants");
  a->add_option("--ckpts", ablate.ckpts, "pure_transformer,pure_ssm,transformer_ssm checkpoints");
  a->add_option("--seed", ablate.seed);
  a->add_option("--epochs", ablate.epochs);
  a->add_option("--n-per-style", ablate.n_per_style)->check(CLI::PositiveNumber);
  a->add_option("--heldout", ablate.heldout)->check(CLI::PositiveNumber);
  a->add_flag("--json", ablate.json);

  CorpusArgs corpus;
  auto* c = app.add_subcommand("gen-corpus", "write the synthetic corpus as WAV files");
  c->add_option("--seed", corpus.seed);
  c->add_option("--n-per-style", corpus.n_per_style)->check(CLI::PositiveNumber);
  c->add_option("--out-dir", corpus.out_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (t->parsed()) return cmd_train(train);
    if (x->parsed()) return cmd_transfer(transfer);
    if (g->parsed()) return cmd_gradcheck(grad);
    if (b->parsed()) return cmd_bench(bench);
    if (a->parsed()) return cmd_ablate(ablate);
    if (c->parsed()) return cmd_gen_corpus(corpus);
  } catch (const ss::NonFiniteError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ss::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
