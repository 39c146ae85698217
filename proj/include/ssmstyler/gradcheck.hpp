#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "error.hpp"
#include "params.hpp"

namespace ssmstyler {

struct GradSample {
  std::string name;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradSample> samples;
  double max_rel_error = 0.0;
};

inline double relative_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-12});
}

/// Compares params' stored gradients against central differences of `loss`.
/// Entries are visited round-robin (shuffled once) so every parameter array is
/// sampled before any is sampled twice; the scalar within an entry is random.
inline GradCheckReport finite_diff_check(const std::function<double(const ParamStore&)>& loss,
                                         ParamStore& params, double epsilon, std::size_t sample,
                                         std::uint64_t seed = 0) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3))
    throw InvalidArgument("epsilon must lie in [1e-7, 1e-3]");
  std::vector<std::string> names;
  for (const auto& [name, p] : params)
    if (p.size()) names.push_back(name);
  if (names.empty()) return {};
  Rng rng(seed);
  for (std::size_t i = names.size(); i > 1; --i) std::swap(names[i - 1], names[rng.below(i)]);

  GradCheckReport report;
  for (std::size_t s = 0; s < sample; ++s) {
    const std::string& name = names[s % names.size()];
    Param& p = params.at(name);
    const std::size_t idx = rng.below(p.size());
    const double orig = p.value[idx];
    p.value[idx] = orig + epsilon;
    const double up = loss(params);
    p.value[idx] = orig - epsilon;
    const double down = loss(params);
    p.value[idx] = orig;
    GradSample g{name, idx, p.grad[idx], (up - down) / (2.0 * epsilon), 0.0};
    g.rel_error = relative_error(g.analytic, g.numeric);
    report.max_rel_error = std::max(report.max_rel_error, g.rel_error);
    report.samples.push_back(std::move(g));
  }
  return report;
}

}  // namespace ssmstyler
