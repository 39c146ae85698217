#pragma once

// Spectral state-space recurrence. For every frequency bin f and channel c,
//
//   h[t] = alpha * h[t-1] + beta * x[t],   h[-1] = 0,
//
// with alpha in (0, 1) and beta > 0 produced from the pooled text embedding.
// alpha and beta are real and scale both parts of the complex spectrum.

#include <cmath>
#include <string>
#include <algorithm>
#include <limits>
#include <vector>

#include "dsp.hpp"
#include "error.hpp"
#include "linalg.hpp"
#include "parallel.hpp"
#include "params.hpp"

namespace ssmstyler {

inline constexpr double kBetaFloor = 1e-6;

/// Per-(bin, channel) recurrence coefficients, index f * channels + c.
struct GateParams {
  std::size_t bins = 0;
  std::size_t channels = 0;
  std::vector<double> alpha;
  std::vector<double> beta;

  std::size_t lanes() const { return bins * channels; }
};

struct HiddenStateGrid {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::size_t channels = 0;
  std::vector<cplx> states;

  HiddenStateGrid() = default;
  HiddenStateGrid(std::size_t t, std::size_t f, std::size_t c)
      : frames(t), bins(f), channels(c), states(t * f * c) {}

  cplx& at(std::size_t t, std::size_t f, std::size_t c) { return states[(t * bins + f) * channels + c]; }
  const cplx& at(std::size_t t, std::size_t f, std::size_t c) const {
    return states[(t * bins + f) * channels + c];
  }
};

namespace detail {

struct GatePreactivation {
  std::vector<double> alpha;  // before sigmoid
  std::vector<double> beta;   // before softplus
};

inline GatePreactivation gate_preactivation(std::span<const double> pooled, const ParamStore& params,
                                            std::size_t lanes) {
  const std::size_t d = pooled.size();
  const Param* w[2] = {&params.at("gate.alpha.weight"), &params.at("gate.beta.weight")};
  const Param* b[2] = {&params.at("gate.alpha.bias"), &params.at("gate.beta.bias")};
  for (int i = 0; i < 2; ++i) {
    if (w[i]->shape != std::vector<std::size_t>{lanes, d} ||
        b[i]->shape != std::vector<std::size_t>{lanes})
      throw InvalidConfig("gate parameters of shape " + shape_string(w[i]->shape) +
                          " do not match " + std::to_string(lanes) + " lanes x d_text " +
                          std::to_string(d));
  }
  GatePreactivation pre{std::vector<double>(lanes), std::vector<double>(lanes)};
  linalg::affine(w[0]->value, lanes, d, pooled, b[0]->value, pre.alpha);
  linalg::affine(w[1]->value, lanes, d, pooled, b[1]->value, pre.beta);
  return pre;
}

}  // namespace detail

/// alpha = sigmoid(W_a e + b_a), beta = softplus(W_b e + b_b) + 1e-6.
inline GateParams compute_gates(std::span<const double> pooled, const ParamStore& params,
                                std::size_t bins, std::size_t channels) {
  const auto pre = detail::gate_preactivation(pooled, params, bins * channels);
  GateParams g{bins, channels, std::vector<double>(bins * channels),
               std::vector<double>(bins * channels)};
  for (std::size_t i = 0; i < g.lanes(); ++i) {
    // sigmoid rounds to exactly 0 or 1 far out; keep alpha strictly inside
    g.alpha[i] = std::clamp(linalg::sigmoid(pre.alpha[i]), std::numeric_limits<double>::min(),
                            std::nextafter(1.0, 0.0));
    g.beta[i] = linalg::softplus(pre.beta[i]) + kBetaFloor;
  }
  return g;
}

/// Accumulates gate parameter gradients; returns the gradient on `pooled`.
inline std::vector<double> compute_gates_backward(std::span<const double> pooled,
                                                  std::span<const double> grad_alpha,
                                                  std::span<const double> grad_beta,
                                                  ParamStore& params) {
  const std::size_t lanes = grad_alpha.size(), d = pooled.size();
  const auto pre = detail::gate_preactivation(pooled, params, lanes);
  std::vector<double> ga(lanes), gb(lanes), gpooled(d, 0.0);
  for (std::size_t i = 0; i < lanes; ++i) {
    const double a = linalg::sigmoid(pre.alpha[i]);
    ga[i] = grad_alpha[i] * a * (1.0 - a);
    gb[i] = grad_beta[i] * linalg::sigmoid(pre.beta[i]);
  }
  const char* names[2][2] = {{"gate.alpha.weight", "gate.alpha.bias"},
                             {"gate.beta.weight", "gate.beta.bias"}};
  const std::vector<double>* grads[2] = {&ga, &gb};
  for (int k = 0; k < 2; ++k) {
    Param& w = params.at(names[k][0]);
    Param& b = params.at(names[k][1]);
    linalg::outer_acc(*grads[k], pooled, w.grad);
    for (std::size_t i = 0; i < lanes; ++i) b.grad[i] += (*grads[k])[i];
    linalg::affine_t_acc(w.value, lanes, d, *grads[k], gpooled);
  }
  return gpooled;
}

inline void check_scan_shapes(const SpectralGrid& x, const GateParams& gates) {
  if (gates.bins != x.bins || gates.channels != x.channels || gates.alpha.size() != gates.lanes() ||
      gates.beta.size() != gates.lanes())
    throw InvalidArgument("gate shape " + std::to_string(gates.bins) + "x" +
                          std::to_string(gates.channels) + " does not match grid " +
                          std::to_string(x.bins) + "x" + std::to_string(x.channels));
}

/// Reference scan: one sequential pass per lane.
inline HiddenStateGrid ssm_scan(const SpectralGrid& x, const GateParams& gates) {
  check_scan_shapes(x, gates);
  HiddenStateGrid h(x.frames, x.bins, x.channels);
  const std::size_t lanes = gates.lanes();
  for (std::size_t l = 0; l < lanes; ++l) {
    const double a = gates.alpha[l], b = gates.beta[l];
    cplx state{};
    for (std::size_t t = 0; t < x.frames; ++t) {
      state = a * state + b * x.data[t * lanes + l];
      h.states[t * lanes + l] = state;
    }
  }
  return h;
}

struct ScanOptions {
  std::size_t chunk = 64;
  ExecPolicy exec{};
};

/// Two-level scan: each chunk is scanned from a zero state, chunk carries are
/// propagated through the affine maps (a^len, end value), then every element
/// gets carry * a^(offset+1) added. Lanes run in parallel under `opts.exec`.
inline HiddenStateGrid ssm_scan_chunked(const SpectralGrid& x, const GateParams& gates,
                                        const ScanOptions& opts = {}) {
  check_scan_shapes(x, gates);
  if (opts.chunk == 0) throw InvalidArgument("chunk size must be positive");
  HiddenStateGrid h(x.frames, x.bins, x.channels);
  const std::size_t lanes = gates.lanes(), frames = x.frames, chunk = opts.chunk;
  const std::size_t nchunks = (frames + chunk - 1) / chunk;
  parallel_for(lanes, opts.exec, [&](std::size_t lb, std::size_t le) {
    std::vector<double> pow(chunk + 1);
    for (std::size_t l = lb; l < le; ++l) {
      const double a = gates.alpha[l], b = gates.beta[l];
      pow[0] = 1.0;
      for (std::size_t k = 1; k <= chunk; ++k) pow[k] = pow[k - 1] * a;
      // local scans
      for (std::size_t c = 0; c < nchunks; ++c) {
        cplx s{};
        for (std::size_t t = c * chunk; t < std::min(frames, (c + 1) * chunk); ++t) {
          s = a * s + b * x.data[t * lanes + l];
          h.states[t * lanes + l] = s;
        }
      }
      // carry fix-up
      cplx carry{};
      for (std::size_t c = 0; c < nchunks; ++c) {
        const std::size_t begin = c * chunk, end = std::min(frames, begin + chunk);
        if (c > 0)
          for (std::size_t t = begin; t < end; ++t) h.states[t * lanes + l] += pow[t - begin + 1] * carry;
        carry = h.states[(end - 1) * lanes + l];
      }
    }
  });
  return h;
}

/// Gradients of a real loss through ssm_scan. Complex gradients are stored as
/// dL/dRe + i dL/dIm.
struct ScanGradients {
  std::vector<cplx> grad_x;  // same layout as the grid
  std::vector<double> grad_alpha;
  std::vector<double> grad_beta;
};

inline ScanGradients ssm_scan_backward(const SpectralGrid& x, const GateParams& gates,
                                       std::span<const cplx> upstream) {
  check_scan_shapes(x, gates);
  if (upstream.size() != x.data.size()) throw InvalidArgument("upstream gradient shape mismatch");
  const std::size_t lanes = gates.lanes(), frames = x.frames;
  const HiddenStateGrid h = ssm_scan(x, gates);
  ScanGradients g{std::vector<cplx>(x.data.size()), std::vector<double>(lanes, 0.0),
                  std::vector<double>(lanes, 0.0)};
  for (std::size_t l = 0; l < lanes; ++l) {
    const double a = gates.alpha[l], b = gates.beta[l];
    cplx adj{};
    double ga = 0.0, gb = 0.0;
    for (std::size_t t = frames; t-- > 0;) {
      const std::size_t i = t * lanes + l;
      adj = upstream[i] + a * adj;
      g.grad_x[i] = b * adj;
      // Re(conj(adj) * v) = adj.re * v.re + adj.im * v.im
      if (t > 0) {
        const cplx prev = h.states[i - lanes];
        ga += adj.real() * prev.real() + adj.imag() * prev.imag();
      }
      gb += adj.real() * x.data[i].real() + adj.imag() * x.data[i].imag();
    }
    g.grad_alpha[l] = ga;
    g.grad_beta[l] = gb;
  }
  return g;
}

}  // namespace ssmstyler
