#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace ssmstyler {

/// Dense row-major real matrix. Used for frame sequences (rows = time).
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

namespace linalg {

// y = W x + b, W is rows x cols. `b` may be empty.
inline void affine(std::span<const double> w, std::size_t rows, std::size_t cols,
                   std::span<const double> x, std::span<const double> b, std::span<double> y) {
  assert(w.size() == rows * cols && x.size() == cols && y.size() == rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w.data() + r * cols;
    double acc = b.empty() ? 0.0 : b[r];
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

// gx += W^T g
inline void affine_t_acc(std::span<const double> w, std::size_t rows, std::size_t cols,
                         std::span<const double> g, std::span<double> gx) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w.data() + r * cols;
    const double gr = g[r];
    if (gr == 0.0) continue;
    for (std::size_t c = 0; c < cols; ++c) gx[c] += wr[c] * gr;
  }
}

// gw += g x^T
inline void outer_acc(std::span<const double> g, std::span<const double> x, std::span<double> gw) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < g.size(); ++r) {
    const double gr = g[r];
    if (gr == 0.0) continue;
    double* out = gw.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) out[c] += gr * x[c];
  }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus(double x) {
  // log(1 + e^x) without overflow for large x
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// In-place numerically stable softmax.
inline void softmax(std::span<double> v) {
  double m = v[0];
  for (double x : v) m = x > m ? x : m;
  double s = 0.0;
  for (double& x : v) {
    x = std::exp(x - m);
    s += x;
  }
  for (double& x : v) x /= s;
}

}  // namespace linalg
}  // namespace ssmstyler
