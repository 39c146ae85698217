#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace ssmstyler;

namespace {

ParamStore encoder_params(const ConvSpec& spec, Rng& rng) {
  ParamStore p;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    p.add(enc_weight_name(i), {l.out_channels, l.in_channels, l.kernel_size});
    p.add(enc_bias_name(i), {l.out_channels});
  }
  oracle::randomize(p, rng);
  return p;
}

}  // namespace

TEST(Conv1d, IdentityKernel) {
  Rng rng(1);
  const Matrix x = oracle::random_matrix(10, 1, rng);
  const std::vector<double> w{1.0}, b{0.0};
  const Matrix y = conv1d_forward(x, w, b, 1, 1);
  EXPECT_EQ(y.data, x.data);
}

TEST(Conv1d, ZeroInputGivesBias) {
  const Matrix x(12, 2);
  Rng rng(2);
  const auto w = oracle::random_vector(3 * 2 * 4, rng);
  const std::vector<double> b{0.5, -1.0, 2.0};
  const Matrix y = conv1d_forward(x, w, b, 4, 2);
  for (std::size_t t = 0; t < y.rows; ++t)
    for (std::size_t o = 0; o < 3; ++o) EXPECT_EQ(y(t, o), b[o]);
}

TEST(Conv1d, MatchesNestedLoops) {
  Rng rng(3);
  const Matrix x = oracle::random_matrix(16, 2, rng);
  const auto w = oracle::random_vector(3 * 2 * 3, rng);
  const auto b = oracle::random_vector(3, rng);
  const Matrix y = conv1d_forward(x, w, b, 3, 2);
  const Matrix ref = oracle::conv1d(x, w, b, 3, 2);
  ASSERT_EQ(y.rows, 7u);
  for (std::size_t i = 0; i < y.data.size(); ++i) EXPECT_NEAR(y.data[i], ref.data[i], 1e-14);
}

TEST(Conv1d, TooShortRejected) {
  const Matrix x(2, 1);
  const std::vector<double> w(3, 1.0), b{0.0};
  EXPECT_THROW(conv1d_forward(x, w, b, 3, 1), InvalidArgument);
}

TEST(Conv1d, LengthFormula) {
  for (std::size_t T = 5; T < 40; ++T)
    for (std::size_t k = 1; k <= 5; ++k)
      for (std::size_t s = 1; s <= 4; ++s) {
        const Matrix x(T, 1);
        const std::vector<double> w(k, 1.0), b{0.0};
        EXPECT_EQ(conv1d_forward(x, w, b, k, s).rows, (T - k) / s + 1);
      }
}

TEST(Conv1d, TranslationCovariance) {
  Rng rng(4);
  const std::size_t shift = 3;
  const Matrix x = oracle::random_matrix(30, 2, rng);
  Matrix xs(30, 2);
  for (std::size_t t = shift; t < 30; ++t)
    for (std::size_t c = 0; c < 2; ++c) xs(t, c) = x(t - shift, c);
  const auto w = oracle::random_vector(2 * 2 * 4, rng);
  const auto b = oracle::random_vector(2, rng);
  const Matrix y = conv1d_forward(x, w, b, 4, 1), ys = conv1d_forward(xs, w, b, 4, 1);
  for (std::size_t t = 0; t + shift < y.rows; ++t)
    for (std::size_t o = 0; o < 2; ++o) EXPECT_NEAR(ys(t + shift, o), y(t, o), 1e-14);
}

TEST(Conv1d, BackwardMatchesFiniteDifferences) {
  Rng rng(5);
  const Matrix x = oracle::random_matrix(20, 2, rng);
  auto w = oracle::random_vector(3 * 2 * 5, rng);
  const auto b = oracle::random_vector(3, rng);
  const Matrix up = oracle::random_matrix((20 - 5) / 3 + 1, 3, rng);
  auto loss = [&](const Matrix& in, const std::vector<double>& wt) {
    const Matrix y = conv1d_forward(in, wt, b, 5, 3);
    double s = 0;
    for (std::size_t i = 0; i < y.data.size(); ++i) s += y.data[i] * up.data[i];
    return s;
  };
  std::vector<double> gw(w.size()), gb(3);
  const Matrix gx = conv1d_backward(x, w, up, 5, 3, gw, gb);
  const double h = 1e-6;
  for (std::size_t i = 0; i < w.size(); ++i) {
    auto wp = w, wm = w;
    wp[i] += h;
    wm[i] -= h;
    EXPECT_NEAR(gw[i], (loss(x, wp) - loss(x, wm)) / (2 * h), 1e-7);
  }
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    Matrix xp = x, xm = x;
    xp.data[i] += h;
    xm.data[i] -= h;
    EXPECT_NEAR(gx.data[i], (loss(xp, w) - loss(xm, w)) / (2 * h), 1e-7);
  }
}

TEST(EncodeSpeech, SingleIdentityLayer) {
  ConvSpec spec{{{1, 1, 1, 1, Activation::identity}}};
  ParamStore p;
  p.add(enc_weight_name(0), {1, 1, 1}).value = {1.0};
  p.add(enc_bias_name(0), {1});
  Waveform w{{0.1, -0.2, 0.3, 0.4}};
  const auto z = encode_speech(w, spec, p);
  EXPECT_EQ(z.frames.data, w.samples);
  EXPECT_EQ(z.stride_samples, 1u);
}

TEST(EncodeSpeech, ZeroWaveformZeroLatent) {
  Rng rng(6);
  const auto spec = ConvSpec::default_encoder();
  auto p = encoder_params(spec, rng);
  for (std::size_t i = 0; i < 2; ++i) std::fill(p.at(enc_bias_name(i)).value.begin(), p.at(enc_bias_name(i)).value.end(), 0.0);
  const auto z = encode_speech(Waveform{std::vector<double>(400, 0.0)}, spec, p);
  for (double v : z.frames.data) EXPECT_EQ(v, 0.0);
}

TEST(EncodeSpeech, ComposesConvLayers) {
  Rng rng(7);
  const auto spec = ConvSpec::default_encoder();
  const auto p = encoder_params(spec, rng);
  Waveform w{oracle::random_vector(500, rng)};
  const auto z = encode_speech(w, spec, p);
  Matrix x(500, 1);
  x.data = w.samples;
  Matrix h = oracle::conv1d(x, p.at("enc.layer0.weight").value, p.at("enc.layer0.bias").value, 9, 4);
  for (double& v : h.data) v = std::tanh(v);
  const Matrix ref = oracle::conv1d(h, p.at("enc.layer1.weight").value, p.at("enc.layer1.bias").value, 5, 4);
  ASSERT_EQ(z.frames.rows, ref.rows);
  ASSERT_EQ(z.frames.cols, 8u);
  for (std::size_t i = 0; i < ref.data.size(); ++i) EXPECT_NEAR(z.frames.data[i], ref.data[i], 1e-13);
  EXPECT_EQ(z.stride_samples, 16u);
}

TEST(EncodeSpeech, LengthArithmetic) {
  const auto spec = ConvSpec::default_encoder();
  EXPECT_EQ(spec.min_input_length(), 25u);
  EXPECT_EQ(spec.output_length(4000), ((4000 - 9) / 4 + 1 - 5) / 4 + 1);
  EXPECT_EQ(spec.output_length(4000), 249u);
  Rng rng(8);
  const auto p = encoder_params(spec, rng);
  for (std::size_t n : {25u, 26u, 40u, 41u, 1000u})
    EXPECT_EQ(encode_speech(Waveform{std::vector<double>(n, 0.1)}, spec, p).length(), spec.output_length(n));
}

TEST(EncodeSpeech, TooShortNamesMinimum) {
  Rng rng(9);
  const auto spec = ConvSpec::default_encoder();
  const auto p = encoder_params(spec, rng);
  try {
    encode_speech(Waveform{std::vector<double>(24, 0.0)}, spec, p);
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("25"), std::string::npos) << e.what();
  }
}

TEST(ProjectStyleAudio, ConstantFramesPoolToThemselves) {
  LatentSequence z{Matrix(7, 3), 1};
  const std::vector<double> v{0.3, -1.2, 0.5};
  for (std::size_t t = 0; t < 7; ++t)
    for (std::size_t c = 0; c < 3; ++c) z.frames(t, c) = v[c];
  const auto m = mean_pool(z);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(m[c], v[c], 1e-15);
}

TEST(ProjectStyleAudio, MatchesOracleAndIsUnit) {
  Rng rng(10);
  ParamStore p;
  p.add("phi_audio.weight", {4, 3});
  p.add("phi_audio.bias", {4});
  for (int trial = 0; trial < 20; ++trial) {
    oracle::randomize(p, rng);
    LatentSequence z{oracle::random_matrix(11, 3, rng), 1};
    const auto u = project_style_audio(z, p);
    std::vector<double> pooled(3, 0.0);
    for (std::size_t t = 0; t < 11; ++t)
      for (std::size_t c = 0; c < 3; ++c) pooled[c] += z.frames(t, c) / 11.0;
    const auto ref = oracle::normalized(
        oracle::matvec(p.at("phi_audio.weight").value, 4, pooled, p.at("phi_audio.bias").value));
    double n = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_NEAR(u[i], ref[i], 1e-12);
      n += u[i] * u[i];
    }
    EXPECT_NEAR(n, 1.0, 1e-12);
  }
}

TEST(ProjectStyleAudio, ZeroPoolRejected) {
  ParamStore p;
  p.add("phi_audio.weight", {4, 3});
  p.add("phi_audio.bias", {4});
  EXPECT_THROW(project_style_audio(LatentSequence{Matrix(5, 3), 1}, p), DegenerateEmbedding);
}
