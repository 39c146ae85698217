#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace ssmstyler;

namespace {

ParamStore classifier(std::size_t classes, std::size_t d) {
  ParamStore p;
  p.add("content.weight", {classes, d});
  p.add("content.bias", {classes});
  return p;
}

std::vector<double> random_unit(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return oracle::normalized(v);
}

}  // namespace

TEST(ContentLoss, UniformLogitsGiveLnClasses) {
  Rng rng(1);
  const LatentSequence z{oracle::random_matrix(10, 4, rng), 1};
  const std::vector<int> labels{0, 1, 2, 0, 1, 2, 2, 2, 1, 0};
  EXPECT_NEAR(content_loss(z, labels, classifier(3, 4)), std::log(3.0), 1e-12);
  EXPECT_NEAR(content_loss(z, labels, classifier(5, 4)), std::log(5.0), 1e-12);
}

TEST(ContentLoss, SaturatesToZero) {
  auto p = classifier(3, 1);
  const LatentSequence z{Matrix(1, 1, 1.0), 1};
  double prev = 1e300;
  for (double m : {1.0, 10.0, 100.0, 800.0}) {
    p.at("content.bias").value = {0.0, m, 0.0};
    const double l = content_loss(z, std::vector<int>{1}, p);
    EXPECT_LE(l, prev);
    EXPECT_GE(l, 0.0);
    prev = l;
  }
  EXPECT_LT(prev, 1e-300);  // already rounds to zero at margin 100
}

TEST(ContentLoss, MatchesDirectSoftmaxCrossEntropy) {
  Rng rng(2);
  auto p = classifier(3, 5);
  oracle::randomize(p, rng, 2.0);
  const LatentSequence z{oracle::random_matrix(4, 5, rng), 1};
  const std::vector<int> labels{2, 0, 1, 1};
  double ref = 0;
  for (std::size_t t = 0; t < 4; ++t) {
    const std::vector<double> x(z.frames.row(t).begin(), z.frames.row(t).end());
    const auto logits = oracle::matvec(p.at("content.weight").value, 3, x, p.at("content.bias").value);
    double z_ = 0;
    for (double l : logits) z_ += std::exp(l);
    ref += -(logits[std::size_t(labels[t])] - std::log(z_));
  }
  EXPECT_NEAR(content_loss(z, labels, p), ref / 4, 1e-12);
}

TEST(ContentLoss, MonotoneInTrueLogit) {
  Rng rng(3);
  auto p = classifier(3, 2);
  oracle::randomize(p, rng);
  const LatentSequence z{oracle::random_matrix(3, 2, rng), 1};
  const std::vector<int> labels{1, 1, 1};
  double prev = content_loss(z, labels, p);
  for (int i = 0; i < 20; ++i) {
    p.at("content.bias").value[1] += 0.25;
    const double l = content_loss(z, labels, p);
    EXPECT_LT(l, prev);
    prev = l;
  }
}

TEST(ContentLoss, BadLabelsRejected) {
  const LatentSequence z{Matrix(3, 2), 1};
  const auto p = classifier(3, 2);
  EXPECT_THROW(content_loss(z, std::vector<int>{0, 1}, p), InvalidArgument);
  EXPECT_THROW(content_loss(z, std::vector<int>{0, 1, 3}, p), InvalidArgument);
  EXPECT_THROW(content_loss(z, std::vector<int>{0, -1, 2}, p), InvalidArgument);
}

TEST(StyleLoss, Examples) {
  const std::vector<double> u{0.6, 0.8, 0.0}, v{-0.6, -0.8, 0.0}, o{0.0, 0.0, 1.0};
  EXPECT_EQ(style_loss(u, u), 0.0);
  EXPECT_NEAR(style_loss(u, v), 2.0, 1e-15);
  EXPECT_NEAR(style_loss(u, o), 1.0, 1e-15);
  EXPECT_THROW(style_loss(u, std::vector<double>(3, 0.0)), DegenerateEmbedding);
}

TEST(StyleLoss, BoundsSymmetryAndSimilarityIdentity) {
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_unit(8, rng), b = random_unit(8, rng);
    const double l = style_loss(a, b);
    EXPECT_GE(l, 0.0);
    EXPECT_LE(l, 2.0);
    EXPECT_EQ(l, style_loss(b, a));
    EXPECT_EQ(style_similarity(a, b), 1.0 - l);
    EXPECT_NEAR(style_loss(a, a), 0.0, 1e-15);
  }
}

TEST(StyleLoss, BackwardMatchesFiniteDifferences) {
  Rng rng(5);
  const auto a = oracle::random_vector(6, rng), b = oracle::random_vector(6, rng);
  const auto g = style_loss_backward(a, b, 0.5);
  const double h = 1e-6;
  for (std::size_t i = 0; i < 6; ++i) {
    auto ap = a, am = a;
    ap[i] += h;
    am[i] -= h;
    EXPECT_NEAR(g.grad_audio[i], 0.5 * (style_loss(ap, b) - style_loss(am, b)) / (2 * h), 1e-8);
  }
}

TEST(SmoothnessLoss, Examples) {
  HiddenStateGrid h(4, 1, 1);
  h.states = {0.0, 1.0, 0.0, 1.0};
  EXPECT_EQ(smoothness_loss(h), 3.0);

  HiddenStateGrid c(6, 3, 2);
  Rng rng(6);
  for (std::size_t l = 0; l < 6; ++l) {
    const cplx v{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    for (std::size_t t = 0; t < 6; ++t) c.states[t * 6 + l] = v;
  }
  EXPECT_EQ(smoothness_loss(c), 0.0);

  HiddenStateGrid one(1, 3, 2);
  for (auto& v : one.states) v = {1.0, 2.0};
  EXPECT_EQ(smoothness_loss(one), 0.0);
}

TEST(SmoothnessLoss, TimeReversalInvariant) {
  Rng rng(7);
  HiddenStateGrid h(9, 2, 3), r(9, 2, 3);
  for (auto& v : h.states) v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  for (std::size_t t = 0; t < 9; ++t)
    for (std::size_t l = 0; l < 6; ++l) r.states[t * 6 + l] = h.states[(8 - t) * 6 + l];
  EXPECT_NEAR(smoothness_loss(h), smoothness_loss(r), 1e-12);
}

TEST(SmoothnessLoss, BackwardMatchesFiniteDifferences) {
  Rng rng(8);
  HiddenStateGrid h(5, 2, 1);
  for (auto& v : h.states) v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  const auto g = smoothness_loss_backward(h, 2.0);
  const double eps = 1e-6;
  for (std::size_t i = 0; i < h.states.size(); ++i)
    for (int part = 0; part < 2; ++part) {
      auto hp = h, hm = h;
      const cplx d = part ? cplx(0, eps) : cplx(eps, 0);
      hp.states[i] += d;
      hm.states[i] -= d;
      const double num = 2.0 * (smoothness_loss(hp) - smoothness_loss(hm)) / (2 * eps);
      EXPECT_NEAR(part ? g[i].imag() : g[i].real(), num, 1e-7);
    }
}

TEST(TotalLoss, WeightedSum) {
  EXPECT_EQ(total_loss(2.0, 1.0, 0.5, {1, 0, 0}), 2.0);
  EXPECT_EQ(total_loss(2.0, 1.0, 0.5, {0, 0, 0}), 0.0);
  EXPECT_NEAR(total_loss(2.0, 1.0, 0.5, {0.5, 0.3, 0.2}), 1.4, 1e-15);
  const auto r = make_report(0.7, 0.2, 13.0, {});
  EXPECT_NEAR(r.total, 0.7 + 0.2 + 0.13, 1e-12);
}

TEST(TotalLoss, WeightsValidated) {
  EXPECT_NO_THROW((LossWeights{1, 1, 0.01}.validate()));
  EXPECT_THROW((LossWeights{-1, 1, 0.01}.validate()), InvalidArgument);
  EXPECT_THROW((LossWeights{1, std::nan(""), 0.01}.validate()), InvalidArgument);
}

TEST(TotalLoss, LogLineFormat) {
  const LossReport r{1.0986123, 0.25, 12.3456789, 1.4720691};
  EXPECT_EQ(format_loss_line(7, r), "step=7 content=1.09861 style=0.25 smooth=12.3457 total=1.47207");
}
