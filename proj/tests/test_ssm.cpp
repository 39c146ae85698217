#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace ssmstyler;

namespace {

ParamStore gate_params(std::size_t lanes, std::size_t d) {
  ParamStore p;
  p.add("gate.alpha.weight", {lanes, d});
  p.add("gate.alpha.bias", {lanes});
  p.add("gate.beta.weight", {lanes, d});
  p.add("gate.beta.bias", {lanes});
  return p;
}

SpectralGrid random_grid(std::size_t T, std::size_t F, std::size_t C, Rng& rng, double m = 1.0) {
  SpectralGrid g(T, F, C, {}, T);
  for (auto& v : g.data) v = {rng.uniform(-m, m), rng.uniform(-m, m)};
  return g;
}

GateParams random_gates(std::size_t F, std::size_t C, Rng& rng) {
  GateParams g{F, C, std::vector<double>(F * C), std::vector<double>(F * C)};
  for (auto& a : g.alpha) a = rng.uniform(0.0, 0.999);
  for (auto& b : g.beta) b = rng.uniform(1e-3, 3.0);
  return g;
}

}  // namespace

TEST(Gates, ZeroParametersGiveHalfAndLn2) {
  const auto p = gate_params(6, 4);
  const std::vector<double> e{0.3, -0.1, 2.0, 0.5};
  const auto g = compute_gates(e, p, 3, 2);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(g.alpha[i], 0.5);
    EXPECT_NEAR(g.beta[i], std::log(2.0) + 1e-6, 1e-15);
  }
}

TEST(Gates, SaturatedAlphaStaysPositive) {
  auto p = gate_params(4, 2);
  std::fill(p.at("gate.alpha.bias").value.begin(), p.at("gate.alpha.bias").value.end(), -40.0);
  const auto g = compute_gates(std::vector<double>{1.0, -1.0}, p, 4, 1);
  for (double a : g.alpha) {
    EXPECT_GT(a, 0.0);
    EXPECT_LT(a, 1e-17);
  }
}

TEST(Gates, MatchAffineOracle) {
  Rng rng(1);
  auto p = gate_params(10, 5);
  oracle::randomize(p, rng, 2.0);
  const auto e = oracle::random_vector(5, rng);
  const auto g = compute_gates(e, p, 5, 2);
  const auto pa = oracle::matvec(p.at("gate.alpha.weight").value, 10, e, p.at("gate.alpha.bias").value);
  const auto pb = oracle::matvec(p.at("gate.beta.weight").value, 10, e, p.at("gate.beta.bias").value);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_NEAR(g.alpha[i], 1.0 / (1.0 + std::exp(-pa[i])), 1e-14);
    EXPECT_NEAR(g.beta[i], std::log1p(std::exp(pb[i])) + 1e-6, 1e-14);
  }
}

TEST(Gates, RangesHoldForExtremeEmbeddings) {
  Rng rng(2);
  auto p = gate_params(8, 3);
  oracle::randomize(p, rng, 1.0);
  for (double scale : {1e-3, 1.0, 50.0, 1e3, 1e6}) {
    const auto e = oracle::random_vector(3, rng, -scale, scale);
    const auto g = compute_gates(e, p, 8, 1);
    for (std::size_t i = 0; i < 8; ++i) {
      EXPECT_GT(g.alpha[i], 0.0);
      EXPECT_LT(g.alpha[i], 1.0);
      EXPECT_GT(g.beta[i], 0.0);
      EXPECT_TRUE(std::isfinite(g.beta[i]));
    }
  }
}

TEST(Gates, ShapeMismatchIsInvalidConfig) {
  const auto p = gate_params(6, 4);
  EXPECT_THROW(compute_gates(std::vector<double>(4, 0.0), p, 4, 2), InvalidConfig);
  EXPECT_THROW(compute_gates(std::vector<double>(3, 0.0), p, 3, 2), InvalidConfig);
}

TEST(Scan, GeometricClosedForm) {
  SpectralGrid x(32, 2, 1, {}, 32);
  for (auto& v : x.data) v = 1.0;
  const GateParams g{2, 1, {0.5, 0.5}, {1.0, 1.0}};
  const auto h = ssm_scan(x, g);
  for (std::size_t t = 0; t < 32; ++t) {
    // h_t = sum_{k=0..t} 0.5^k
    double ref = 0;
    for (std::size_t k = 0; k <= t; ++k) ref += std::pow(0.5, double(k));
    EXPECT_NEAR(h.at(t, 0, 0).real(), ref, 1e-12);
    EXPECT_NEAR(h.at(t, 0, 0).real(), 2.0 - std::pow(2.0, -double(t)), 1e-9);
    EXPECT_EQ(h.at(t, 1, 0).imag(), 0.0);
  }
}

TEST(Scan, AlphaLimitIsScaling) {
  Rng rng(3);
  auto p = gate_params(6, 2);
  std::fill(p.at("gate.alpha.bias").value.begin(), p.at("gate.alpha.bias").value.end(), -40.0);
  const auto g = compute_gates(std::vector<double>{0.2, 0.1}, p, 3, 2);
  const auto x = random_grid(9, 3, 2, rng);
  const auto h = ssm_scan(x, g);
  for (std::size_t t = 0; t < 9; ++t)
    for (std::size_t f = 0; f < 3; ++f)
      for (std::size_t c = 0; c < 2; ++c)
        EXPECT_LE(std::abs(h.at(t, f, c) - g.beta[f * 2 + c] * x.at(t, f, c)), 1e-12);
}

TEST(Scan, ZeroInputZeroState) {
  Rng rng(4);
  const SpectralGrid x(20, 3, 2, {}, 20);
  for (const auto& v : ssm_scan(x, random_gates(3, 2, rng)).states) EXPECT_EQ(v, cplx(0, 0));
}

TEST(Scan, MatchesDefinitionLoop) {
  Rng rng(5);
  const auto x = random_grid(40, 5, 3, rng);
  const auto g = random_gates(5, 3, rng);
  const auto h = ssm_scan(x, g);
  EXPECT_LE(oracle::max_abs_diff(h.states, oracle::scan(x, g)), 1e-13);
}

TEST(Scan, ChunkedEqualsSequential) {
  Rng rng(6);
  for (std::size_t T : {1u, 7u, 64u, 65u, 1000u, 4096u})
    for (std::size_t chunk : {1u, 3u, 64u, 5000u})
      for (unsigned threads : {1u, 3u}) {
        const auto x = random_grid(T, 4, 2, rng);
        const auto g = random_gates(4, 2, rng);
        const auto a = ssm_scan(x, g);
        const auto b = ssm_scan_chunked(x, g, {chunk, ExecPolicy{threads}});
        const double scale = std::max(oracle::max_abs(a.states), 1e-300);
        EXPECT_LE(oracle::max_abs_diff(a.states, b.states) / scale, 1e-12)
            << "T=" << T << " chunk=" << chunk << " threads=" << threads;
      }
}

TEST(Scan, LinearInInput) {
  Rng rng(7);
  const auto x = random_grid(30, 3, 2, rng), y = random_grid(30, 3, 2, rng);
  const auto g = random_gates(3, 2, rng);
  const cplx a = 0.7, b = -1.3;
  SpectralGrid mix = x;
  for (std::size_t i = 0; i < mix.data.size(); ++i) mix.data[i] = a * x.data[i] + b * y.data[i];
  const auto hx = ssm_scan(x, g), hy = ssm_scan(y, g), hm = ssm_scan(mix, g);
  std::vector<cplx> ref(hm.states.size());
  for (std::size_t i = 0; i < ref.size(); ++i) ref[i] = a * hx.states[i] + b * hy.states[i];
  EXPECT_LE(oracle::max_abs_diff(hm.states, ref), 1e-9 * oracle::max_abs(ref));
}

TEST(Scan, BoundedInputBoundedState) {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const double M = rng.uniform(0.1, 10.0);
    const auto x = random_grid(50, 3, 2, rng, M / std::sqrt(2.0));
    const auto g = random_gates(3, 2, rng);
    const auto h = ssm_scan(x, g);
    for (std::size_t t = 0; t < 50; ++t)
      for (std::size_t l = 0; l < 6; ++l)
        EXPECT_LE(std::abs(h.states[t * 6 + l]), g.beta[l] * M / (1.0 - g.alpha[l]) * (1 + 1e-12));
  }
}

TEST(Scan, ShapeMismatchRejected) {
  Rng rng(9);
  const auto x = random_grid(5, 3, 2, rng);
  EXPECT_THROW(ssm_scan(x, random_gates(2, 2, rng)), InvalidArgument);
  EXPECT_THROW(ssm_scan_chunked(x, random_gates(3, 1, rng)), InvalidArgument);
  EXPECT_THROW(ssm_scan_backward(x, random_gates(3, 1, rng), x.data), InvalidArgument);
}

TEST(ScanBackward, SingleStep) {
  SpectralGrid x(1, 1, 1, {}, 1);
  x.data[0] = {0.3, -0.8};
  const GateParams g{1, 1, {0.4}, {1.7}};
  const std::vector<cplx> up{{2.0, 0.5}};
  const auto r = ssm_scan_backward(x, g, up);
  EXPECT_NEAR(r.grad_beta[0], 2.0 * 0.3 + 0.5 * -0.8, 1e-15);
  EXPECT_EQ(r.grad_alpha[0], 0.0);
  EXPECT_NEAR(std::abs(r.grad_x[0] - 1.7 * up[0]), 0.0, 1e-15);
}

TEST(ScanBackward, ZeroUpstreamZeroGradients) {
  Rng rng(10);
  const auto x = random_grid(6, 2, 2, rng);
  const auto r = ssm_scan_backward(x, random_gates(2, 2, rng), std::vector<cplx>(x.data.size()));
  for (auto v : r.grad_x) EXPECT_EQ(v, cplx(0, 0));
  for (double v : r.grad_alpha) EXPECT_EQ(v, 0.0);
  for (double v : r.grad_beta) EXPECT_EQ(v, 0.0);
}

TEST(ScanBackward, MatchesFiniteDifferencesOnEnergy) {
  // L = sum |h|^2, so dL/dh = 2h (as dRe + i dIm)
  Rng rng(11);
  auto x = random_grid(5, 2, 2, rng);
  auto g = random_gates(2, 2, rng);
  auto loss = [](const SpectralGrid& xx, const GateParams& gg) {
    double s = 0;
    for (const auto& v : ssm_scan(xx, gg).states) s += std::norm(v);
    return s;
  };
  const auto h = ssm_scan(x, g);
  std::vector<cplx> up(h.states.size());
  for (std::size_t i = 0; i < up.size(); ++i) up[i] = 2.0 * h.states[i];
  const auto r = ssm_scan_backward(x, g, up);
  const double eps = 1e-6;
  auto rel = [](double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-12}); };
  for (std::size_t l = 0; l < 4; ++l) {
    auto gp = g, gm = g;
    gp.alpha[l] += eps;
    gm.alpha[l] -= eps;
    EXPECT_LT(rel(r.grad_alpha[l], (loss(x, gp) - loss(x, gm)) / (2 * eps)), 1e-6);
    gp = g;
    gm = g;
    gp.beta[l] += eps;
    gm.beta[l] -= eps;
    EXPECT_LT(rel(r.grad_beta[l], (loss(x, gp) - loss(x, gm)) / (2 * eps)), 1e-6);
  }
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    for (int part = 0; part < 2; ++part) {
      const cplx d = part ? cplx(0, eps) : cplx(eps, 0);
      auto xp = x, xm = x;
      xp.data[i] += d;
      xm.data[i] -= d;
      const double num = (loss(xp, g) - loss(xm, g)) / (2 * eps);
      const double ana = part ? r.grad_x[i].imag() : r.grad_x[i].real();
      EXPECT_LT(rel(ana, num), 1e-6) << i << "/" << part;
    }
  }
}
