#pragma once

// Evaluation and timing harness: the ablation table over fusion variants and
// the linear-vs-quadratic scaling benchmark.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "fusion.hpp"
#include "losses.hpp"
#include "model.hpp"
#include "params.hpp"

namespace ssmstyler {

/// CLIP-Audio-style score: cosine of two unit embeddings, defined as
/// 1 - style_loss so the two stay bit-for-bit consistent.
inline double style_similarity(std::span<const double> audio_emb, std::span<const double> text_emb) {
  return 1.0 - style_loss(audio_emb, text_emb);
}

struct EvalResult {
  FusionVariant variant = FusionVariant::transformer_ssm;
  double style_similarity = 0.0;     // matched prompt, mean over examples
  double mismatched_similarity = 0.0;  // other three style words, mean
  double content_accuracy = 0.0;

  double margin() const { return style_similarity - mismatched_similarity; }
};

struct AblationEntry {
  FusionVariant variant;
  const ParamStore* params;
};

inline EvalResult evaluate_variant(const ModelConfig& cfg, const ParamStore& params,
                                   FusionVariant variant, const std::vector<ToyExample>& heldout) {
  const Vocabulary& vocab = Vocabulary::builtin();
  EvalResult r;
  r.variant = variant;
  for (const auto& ex : heldout) {
    const TransferResult out = stylize(cfg, params, ex.waveform, tokenize(ex.prompt, vocab), variant);
    r.style_similarity += style_similarity(out.audio_emb, out.text_emb);
    double other = 0.0;
    for (int s = 0; s < 4; ++s) {
      if (s == ex.style_id) continue;
      const auto text = embed_text(tokenize(restyle_prompt(ex.prompt, s), vocab), params);
      other += style_similarity(out.audio_emb, project_style_text(text, params));
    }
    r.mismatched_similarity += other / 3.0;
    r.content_accuracy += content_accuracy(out.styled, ex.frame_labels, params);
  }
  const double n = static_cast<double>(heldout.size());
  r.style_similarity /= n;
  r.mismatched_similarity /= n;
  r.content_accuracy /= n;
  return r;
}

/// One row per entry, in the given order.
inline std::vector<EvalResult> run_ablation(const ModelConfig& cfg,
                                            const std::vector<AblationEntry>& entries,
                                            const std::vector<ToyExample>& heldout) {
  if (heldout.empty()) throw InvalidArgument("ablation needs held-out examples");
  std::vector<EvalResult> rows;
  for (const auto& e : entries) {
    if (!e.params) throw InvalidArgument("missing checkpoint for " + std::string(variant_name(e.variant)));
    rows.push_back(evaluate_variant(cfg, *e.params, e.variant, heldout));
  }
  return rows;
}

// Reported values for context only; the corpus and baselines are not reproduced.
inline double reported_clip_audio(FusionVariant v) {
  switch (v) {
    case FusionVariant::pure_transformer: return 0.38;
    case FusionVariant::pure_ssm: return 0.33;
    case FusionVariant::transformer_ssm: return 0.44;
  }
  return 0.0;
}

inline std::string format_ablation_table(const std::vector<EvalResult>& rows) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-28s %10s %12s %8s %9s %16s\n", "Variant", "StyleSim", "Mismatched",
                "Margin", "ContentAcc", "Reported CLIP*");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-28s %10.4f %12.4f %8.4f %9.4f %16.2f\n",
                  std::string(variant_label(r.variant)).c_str(), r.style_similarity,
                  r.mismatched_similarity, r.margin(), r.content_accuracy, reported_clip_audio(r.variant));
    out += buf;
  }
  out += "* published CLIP-Audio on the original corpus, for context; not reproduced here\n";
  return out;
}

// ---------------------------------------------------------------------------
// Scaling

inline constexpr const char* kQuadraticReference = "quadratic_self_attention";

struct BenchResult {
  std::string variant;
  std::size_t seq_len = 0;
  double wall_time_s = 0.0;
  std::size_t param_count = 0;
  bool parallel = false;
};

struct BenchOptions {
  ModelConfig model = bench_model();
  std::size_t repeats = 5;
  ExecPolicy exec{};
  std::uint64_t seed = 0;
  bool include_quadratic = true;

  // Narrow spectral frames so T-dependent costs dominate the fixed per-frame projection.
  static ModelConfig bench_model() {
    ModelConfig c;
    c.encoder = {{{1, 8, 9, 4, Activation::tanh}, {8, 2, 5, 4, Activation::identity}}};
    c.stft = {16, 4, WindowKind::hann};
    c.decoder = {{{2, 8, 8, 4}, {8, 1, 8, 4}}};
    return c;
  }
};

inline std::size_t count_params(const ModelConfig& cfg) { return init_params(0, cfg).scalar_count(); }

inline SelfAttentionWeights make_self_attention(const ModelConfig& cfg, Rng& rng) {
  const std::size_t dm = cfg.d_model(), dh = cfg.d_head;
  SelfAttentionWeights w{Matrix(dh, dm), Matrix(dh, dm), Matrix(dh, dm), Matrix(dm, dh)};
  const double a = std::sqrt(1.0 / static_cast<double>(dm)), ao = std::sqrt(1.0 / static_cast<double>(dh));
  for (Matrix* m : {&w.wq, &w.wk, &w.wv})
    for (double& v : m->data) v = rng.uniform(-a, a);
  for (double& v : w.wo.data) v = rng.uniform(-ao, ao);
  return w;
}

inline SpectralGrid random_grid(std::size_t frames, std::size_t bins, std::size_t channels,
                                const StftConfig& stft, Rng& rng) {
  SpectralGrid g(frames, bins, channels, stft, frames * stft.hop);
  for (auto& v : g.data) v = {rng.normal(), rng.normal()};
  return g;
}

template <typename Fn>
double median_seconds(std::size_t repeats, Fn&& fn) {
  fn();  // warm-up
  std::vector<double> t;
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  std::sort(t.begin(), t.end());
  return std::max(t[t.size() / 2], 1e-9);
}

/// Median wall time of one layer forward per variant and sequence length.
inline std::vector<BenchResult> run_scaling_bench(const std::vector<std::size_t>& seq_lens,
                                                  const BenchOptions& opts = {}) {
  if (opts.repeats < 3) throw InvalidArgument("repeats must be >= 3");
  if (!std::is_sorted(seq_lens.begin(), seq_lens.end()))
    throw InvalidArgument("seq_lens must be ascending");
  const ModelConfig& cfg = opts.model;
  const ParamStore params = init_params(opts.seed, cfg);
  Rng rng(opts.seed + 17);
  const SelfAttentionWeights self = make_self_attention(cfg, rng);
  const std::size_t base_params = params.scalar_count();
  const std::size_t self_params = self.wq.data.size() * 3 + self.wo.data.size();
  const TextEmbedding text = embed_text(tokenize("excited", Vocabulary::builtin()), params);
  const bool parallel = opts.exec.threads > 1;

  std::vector<BenchResult> out;
  volatile double sink = 0.0;
  for (std::size_t T : seq_lens) {
    const SpectralGrid grid = random_grid(T, cfg.bins(), cfg.latent_dim(), cfg.stft, rng);
    for (FusionVariant v : kAllVariants) {
      const double s = median_seconds(opts.repeats, [&] {
        sink = sink + transformer_ssm_forward(grid, text, v, params, cfg.d_head, opts.exec).data[0].real();
      });
      out.push_back({std::string(variant_name(v)), T, s, base_params, parallel});
    }
    if (opts.include_quadratic) {
      const double s = median_seconds(opts.repeats, [&] {
        sink = sink + quadratic_reference_forward(grid, text, params, self, opts.exec).data[0].real();
      });
      out.push_back({kQuadraticReference, T, s, base_params + self_params, parallel});
    }
  }
  return out;
}

inline std::string format_bench_table(const std::vector<BenchResult>& rows) {
  std::string out;
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-26s %8s %14s %12s %9s\n", "Variant", "T", "Median time (s)",
                "Params", "Parallel");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-26s %8zu %14.6f %12zu %9s\n", r.variant.c_str(), r.seq_len,
                  r.wall_time_s, r.param_count, r.parallel ? "yes" : "no");
    out += buf;
  }
  return out;
}

}  // namespace ssmstyler
