#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace ssmstyler {

/// One named parameter array and its gradient, both row-major with the same shape.
struct Param {
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;

  std::size_t size() const { return value.size(); }
};

inline std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

/// Named parameters with paired gradients. Iteration order is lexicographic by
/// name, which fixes the checkpoint layout and every seeded traversal.
class ParamStore {
 public:
  using Map = std::map<std::string, Param>;

  Param& add(const std::string& name, std::vector<std::size_t> shape) {
    if (entries_.count(name)) throw InvalidConfig("duplicate parameter '" + name + "'");
    const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                          std::multiplies<>());
    Param& p = entries_[name];
    p.shape = std::move(shape);
    p.value.assign(n, 0.0);
    p.grad.assign(n, 0.0);
    return p;
  }

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  Param& at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw InvalidConfig("missing parameter '" + name + "'");
    return it->second;
  }
  const Param& at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw InvalidConfig("missing parameter '" + name + "'");
    return it->second;
  }

  // Look up a parameter and insist on its shape.
  const Param& expect(const std::string& name, const std::vector<std::size_t>& shape) const {
    const Param& p = at(name);
    if (p.shape != shape)
      throw InvalidConfig("parameter '" + name + "' has shape " + shape_string(p.shape) +
                          ", expected " + shape_string(shape));
    return p;
  }
  Param& expect(const std::string& name, const std::vector<std::size_t>& shape) {
    return const_cast<Param&>(std::as_const(*this).expect(name, shape));
  }

  std::span<const double> value(const std::string& name) const { return at(name).value; }
  std::span<double> grad(const std::string& name) { return at(name).grad; }

  void zero_grad() {
    for (auto& [_, p] : entries_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, p] : entries_) n += p.size();
    return n;
  }

  bool all_finite() const {
    for (const auto& [_, p] : entries_)
      for (double v : p.value)
        if (!std::isfinite(v)) return false;
    return true;
  }

  std::size_t size() const { return entries_.size(); }
  Map::iterator begin() { return entries_.begin(); }
  Map::iterator end() { return entries_.end(); }
  Map::const_iterator begin() const { return entries_.begin(); }
  Map::const_iterator end() const { return entries_.end(); }

  // Values and shapes only; gradients are scratch space.
  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    auto ib = b.entries_.begin();
    for (const auto& [name, p] : a.entries_) {
      if (name != ib->first || p.shape != ib->second.shape || p.value != ib->second.value)
        return false;
      ++ib;
    }
    return true;
  }

 private:
  Map entries_;
};

/// Portable 64-bit generator. The uniform mapping is spelled out so seeded
/// results do not depend on the standard library's distribution classes.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // splitmix64
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }
  double normal() {
    // Box-Muller; one value per call keeps the stream simple.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::uint64_t state_;
};

inline void init_uniform(Param& p, std::size_t fan_in, Rng& rng) {
  const double a = std::sqrt(1.0 / static_cast<double>(fan_in));
  for (double& v : p.value) v = rng.uniform(-a, a);
}

}  // namespace ssmstyler
