#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "error.hpp"
#include "params.hpp"

namespace ssmstyler {

struct AdamState {
  double lr = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step_count = 0;
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
};

/// One bias-corrected Adam update over every parameter, then zero the gradients.
/// A non-finite gradient aborts the step before anything is modified.
inline void adam_step(ParamStore& params, AdamState& state) {
  if (state.beta1 < 0.0 || state.beta1 >= 1.0 || state.beta2 < 0.0 || state.beta2 >= 1.0)
    throw InvalidArgument("Adam betas must lie in [0, 1)");
  for (const auto& [name, p] : params)
    for (double g : p.grad)
      if (!std::isfinite(g)) throw NonFiniteError("non-finite gradient in '" + name + "'");

  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (auto& [name, p] : params) {
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.size() != p.size()) {
      m.assign(p.size(), 0.0);
      v.assign(p.size(), 0.0);
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p.value[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
      p.grad[i] = 0.0;
    }
  }
}

}  // namespace ssmstyler
