#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "dsp.hpp"
#include "error.hpp"
#include "linalg.hpp"
#include "params.hpp"
#include "ssm.hpp"

namespace ssmstyler {

struct LossWeights {
  double lambda_content = 1.0;
  double lambda_style = 1.0;
  double lambda_smooth = 0.01;

  void validate() const {
    for (double l : {lambda_content, lambda_style, lambda_smooth})
      if (!std::isfinite(l) || l < 0.0) throw InvalidArgument("loss weights must be finite and >= 0");
  }
};

struct LossReport {
  double content = 0.0;
  double style = 0.0;
  double smooth = 0.0;
  double total = 0.0;
};

inline double total_loss(double content, double style, double smooth, const LossWeights& w) {
  return w.lambda_content * content + w.lambda_style * style + w.lambda_smooth * smooth;
}

inline LossReport make_report(double content, double style, double smooth, const LossWeights& w) {
  return {content, style, smooth, total_loss(content, style, smooth, w)};
}

// "step=N content=X style=Y smooth=Z total=W", 6 significant digits.
inline std::string format_loss_line(std::size_t step, const LossReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "step=%zu content=%.6g style=%.6g smooth=%.6g total=%.6g", step,
                r.content, r.style, r.smooth, r.total);
  return buf;
}

// ---------------------------------------------------------------------------
// Content: frame-wise softmax cross-entropy of a linear pseudo-phoneme classifier.

namespace detail {

inline void check_labels(std::size_t frames, std::span<const int> labels, std::size_t classes) {
  if (labels.size() != frames)
    throw InvalidArgument("got " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(frames) + " latent frames");
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= classes)
      throw InvalidArgument("label " + std::to_string(l) + " outside [0, " + std::to_string(classes) + ")");
}

}  // namespace detail

inline Matrix classifier_logits(const LatentSequence& z, const ParamStore& params) {
  const Param& w = params.at("content.weight");
  if (w.shape.size() != 2 || w.shape[1] != z.dim())
    throw InvalidConfig("content.weight does not match D_latent");
  const Param& b = params.expect("content.bias", {w.shape[0]});
  Matrix logits(z.length(), w.shape[0]);
  for (std::size_t t = 0; t < z.length(); ++t)
    linalg::affine(w.value, w.shape[0], w.shape[1], z.frames.row(t), b.value, logits.row(t));
  return logits;
}

inline double content_loss(const LatentSequence& z, std::span<const int> labels,
                           const ParamStore& params) {
  Matrix logits = classifier_logits(z, params);
  detail::check_labels(z.length(), labels, logits.cols);
  double sum = 0.0;
  for (std::size_t t = 0; t < logits.rows; ++t) {
    auto row = logits.row(t);
    double m = row[0];
    for (double v : row) m = std::max(m, v);
    double s = 0.0;
    for (double v : row) s += std::exp(v - m);
    sum += m + std::log(s) - row[static_cast<std::size_t>(labels[t])];
  }
  return sum / static_cast<double>(logits.rows);
}

/// Accumulates classifier gradients (scaled by `weight`) and returns dL/dz.
inline Matrix content_loss_backward(const LatentSequence& z, std::span<const int> labels,
                                    ParamStore& params, double weight = 1.0) {
  Matrix logits = classifier_logits(z, params);
  detail::check_labels(z.length(), labels, logits.cols);
  Param& w = params.at("content.weight");
  Param& b = params.at("content.bias");
  Matrix gz(z.length(), z.dim());
  const double inv = weight / static_cast<double>(z.length());
  for (std::size_t t = 0; t < logits.rows; ++t) {
    auto g = logits.row(t);
    linalg::softmax(g);
    g[static_cast<std::size_t>(labels[t])] -= 1.0;
    for (double& v : g) v *= inv;
    linalg::outer_acc(g, z.frames.row(t), w.grad);
    for (std::size_t k = 0; k < g.size(); ++k) b.grad[k] += g[k];
    linalg::affine_t_acc(w.value, w.shape[0], w.shape[1], g, gz.row(t));
  }
  return gz;
}

inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline double content_accuracy(const LatentSequence& z, std::span<const int> labels,
                               const ParamStore& params) {
  Matrix logits = classifier_logits(z, params);
  detail::check_labels(z.length(), labels, logits.cols);
  std::size_t hits = 0;
  for (std::size_t t = 0; t < logits.rows; ++t)
    hits += argmax(logits.row(t)) == static_cast<std::size_t>(labels[t]);
  return static_cast<double>(hits) / static_cast<double>(logits.rows);
}

// ---------------------------------------------------------------------------
// Style: 1 - cosine similarity.

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("embedding sizes differ");
  const double na = linalg::norm(a), nb = linalg::norm(b);
  if (na == 0.0 || nb == 0.0) throw DegenerateEmbedding("cosine similarity of a zero vector");
  // rounding can land a hair outside [-1, 1]
  return std::clamp(linalg::dot(a, b) / (na * nb), -1.0, 1.0);
}

inline double style_loss(std::span<const double> audio_emb, std::span<const double> text_emb) {
  return 1.0 - cosine_similarity(audio_emb, text_emb);
}

struct StyleGradients {
  std::vector<double> grad_audio;
  std::vector<double> grad_text;
};

inline StyleGradients style_loss_backward(std::span<const double> a, std::span<const double> b,
                                          double weight = 1.0) {
  const double na = linalg::norm(a), nb = linalg::norm(b);
  if (na == 0.0 || nb == 0.0) throw DegenerateEmbedding("cosine similarity of a zero vector");
  const double cos = linalg::dot(a, b) / (na * nb);
  StyleGradients g{std::vector<double>(a.size()), std::vector<double>(b.size())};
  // d cos / da = b / (|a||b|) - cos a / |a|^2
  for (std::size_t i = 0; i < a.size(); ++i) {
    g.grad_audio[i] = -weight * (b[i] / (na * nb) - cos * a[i] / (na * na));
    g.grad_text[i] = -weight * (a[i] / (na * nb) - cos * b[i] / (nb * nb));
  }
  return g;
}

// ---------------------------------------------------------------------------
// Smoothness: sum over t >= 1 of |h_t - h_{t-1}|^2 across all bins and channels.

inline double smoothness_loss(const HiddenStateGrid& h) {
  const std::size_t lanes = h.bins * h.channels;
  double sum = 0.0;
  for (std::size_t t = 1; t < h.frames; ++t)
    for (std::size_t l = 0; l < lanes; ++l) sum += std::norm(h.states[t * lanes + l] - h.states[(t - 1) * lanes + l]);
  return sum;
}

inline std::vector<cplx> smoothness_loss_backward(const HiddenStateGrid& h, double weight = 1.0) {
  const std::size_t lanes = h.bins * h.channels;
  std::vector<cplx> g(h.states.size());
  for (std::size_t t = 1; t < h.frames; ++t)
    for (std::size_t l = 0; l < lanes; ++l) {
      const cplx d = 2.0 * weight * (h.states[t * lanes + l] - h.states[(t - 1) * lanes + l]);
      g[t * lanes + l] += d;
      g[(t - 1) * lanes + l] -= d;
    }
  return g;
}

}  // namespace ssmstyler
