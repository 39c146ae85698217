#pragma once

// Transformer-SSM layer: z' = W_F [ SSM(z) ; Attn(z, e_T) ] + b_F, applied per
// spectral frame. Frames are flattened channel-major, then bin, then
// (real, imag): column = (c * bins + f) * 2 + part.

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "dsp.hpp"
#include "error.hpp"
#include "linalg.hpp"
#include "parallel.hpp"
#include "params.hpp"
#include "ssm.hpp"
#include "text.hpp"

namespace ssmstyler {

struct AttentionConfig {
  std::size_t d_model = 0;
  std::size_t d_head = 16;

  double scale() const { return 1.0 / std::sqrt(static_cast<double>(d_head)); }
};

enum class FusionVariant { transformer_ssm, pure_transformer, pure_ssm };

inline constexpr FusionVariant kAllVariants[] = {
    FusionVariant::pure_transformer, FusionVariant::pure_ssm, FusionVariant::transformer_ssm};

// Row labels of the ablation table.
inline std::string_view variant_label(FusionVariant v) {
  switch (v) {
    case FusionVariant::transformer_ssm: return "Transformer-SSM (Ours)";
    case FusionVariant::pure_transformer: return "Pure Transformer (no SSM)";
    case FusionVariant::pure_ssm: return "Pure SSM (no attention)";
  }
  return "?";
}

inline std::string_view variant_name(FusionVariant v) {
  switch (v) {
    case FusionVariant::transformer_ssm: return "transformer_ssm";
    case FusionVariant::pure_transformer: return "pure_transformer";
    case FusionVariant::pure_ssm: return "pure_ssm";
  }
  return "?";
}

inline FusionVariant parse_variant(std::string_view s) {
  for (FusionVariant v : kAllVariants)
    if (variant_name(v) == s) return v;
  throw InvalidArgument("unknown fusion variant '" + std::string(s) + "'");
}

inline bool uses_ssm(FusionVariant v) { return v != FusionVariant::pure_transformer; }
inline bool uses_attention(FusionVariant v) { return v != FusionVariant::pure_ssm; }

// ---------------------------------------------------------------------------
// Frame flattening

inline std::size_t frame_width(std::size_t bins, std::size_t channels) { return 2 * bins * channels; }

template <typename Grid>
Matrix flatten_states(const Grid& g, const std::vector<cplx>& data) {
  Matrix m(g.frames, frame_width(g.bins, g.channels));
  for (std::size_t t = 0; t < g.frames; ++t)
    for (std::size_t f = 0; f < g.bins; ++f)
      for (std::size_t c = 0; c < g.channels; ++c) {
        const cplx v = data[(t * g.bins + f) * g.channels + c];
        const std::size_t col = (c * g.bins + f) * 2;
        m(t, col) = v.real();
        m(t, col + 1) = v.imag();
      }
  return m;
}

inline Matrix flatten_frames(const SpectralGrid& g) { return flatten_states(g, g.data); }
inline Matrix flatten_frames(const HiddenStateGrid& h) { return flatten_states(h, h.states); }

inline std::vector<cplx> unflatten_states(const Matrix& m, std::size_t bins, std::size_t channels) {
  std::vector<cplx> out(m.rows * bins * channels);
  for (std::size_t t = 0; t < m.rows; ++t)
    for (std::size_t f = 0; f < bins; ++f)
      for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t col = (c * bins + f) * 2;
        out[(t * bins + f) * channels + c] = {m(t, col), m(t, col + 1)};
      }
  return out;
}

inline SpectralGrid unflatten_frames(const Matrix& m, const SpectralGrid& like) {
  if (m.rows != like.frames || m.cols != frame_width(like.bins, like.channels))
    throw InvalidArgument("flattened frames do not match grid shape");
  SpectralGrid g = like;
  g.data = unflatten_states(m, like.bins, like.channels);
  return g;
}

// ---------------------------------------------------------------------------
// Cross-attention from frames (queries) to text tokens (keys/values).

struct AttentionTrace {
  Matrix q;        // T x d_head
  Matrix k;        // L x d_head
  Matrix v;        // L x d_head
  Matrix weights;  // T x L
  Matrix context;  // T x d_head
  Matrix output;   // T x d_model
};

struct AttentionWeights {
  const Param& wq;
  const Param& wk;
  const Param& wv;
  const Param& wo;
};

inline AttentionWeights attention_weights(const ParamStore& params, const AttentionConfig& cfg,
                                          std::size_t d_text) {
  return {params.expect("attn.wq", {cfg.d_head, cfg.d_model}),
          params.expect("attn.wk", {cfg.d_head, d_text}),
          params.expect("attn.wv", {cfg.d_head, d_text}),
          params.expect("attn.wo", {cfg.d_model, cfg.d_head})};
}

inline AttentionTrace cross_attention_traced(const Matrix& frames, const TextEmbedding& text,
                                             const ParamStore& params, const AttentionConfig& cfg,
                                             const ExecPolicy& exec = {}) {
  if (text.length() == 0) throw InvalidArgument("cross-attention needs at least one text token");
  if (frames.cols != cfg.d_model)
    throw InvalidArgument("frame width " + std::to_string(frames.cols) + " != d_model " +
                          std::to_string(cfg.d_model));
  const auto w = attention_weights(params, cfg, text.dim());
  const std::size_t T = frames.rows, L = text.length(), dh = cfg.d_head, dm = cfg.d_model;
  AttentionTrace tr{Matrix(T, dh), Matrix(L, dh), Matrix(L, dh), Matrix(T, L), Matrix(T, dh),
                    Matrix(T, dm)};
  for (std::size_t j = 0; j < L; ++j) {
    linalg::affine(w.wk.value, dh, text.dim(), text.tokens.row(j), {}, tr.k.row(j));
    linalg::affine(w.wv.value, dh, text.dim(), text.tokens.row(j), {}, tr.v.row(j));
  }
  const double scale = cfg.scale();
  parallel_for(T, exec, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      linalg::affine(w.wq.value, dh, dm, frames.row(i), {}, tr.q.row(i));
      auto wrow = tr.weights.row(i);
      for (std::size_t j = 0; j < L; ++j) wrow[j] = scale * linalg::dot(tr.q.row(i), tr.k.row(j));
      linalg::softmax(wrow);
      auto ctx = tr.context.row(i);
      for (std::size_t j = 0; j < L; ++j)
        for (std::size_t d = 0; d < dh; ++d) ctx[d] += wrow[j] * tr.v(j, d);
      linalg::affine(w.wo.value, dm, dh, ctx, {}, tr.output.row(i));
    }
  });
  return tr;
}

/// Single-head cross-attention Attn(z_i, e_T) for every frame.
inline Matrix cross_attention(const Matrix& frames, const TextEmbedding& text,
                              const ParamStore& params, const AttentionConfig& cfg,
                              const ExecPolicy& exec = {}) {
  return cross_attention_traced(frames, text, params, cfg, exec).output;
}

struct AttentionGradients {
  Matrix grad_frames;
  Matrix grad_tokens;
};

inline AttentionGradients cross_attention_backward(const Matrix& frames, const TextEmbedding& text,
                                                   const AttentionTrace& tr, const Matrix& grad_out,
                                                   ParamStore& params, const AttentionConfig& cfg) {
  const std::size_t T = frames.rows, L = text.length(), dh = cfg.d_head, dm = cfg.d_model,
                    dt = text.dim();
  Param& wq = params.at("attn.wq");
  Param& wk = params.at("attn.wk");
  Param& wv = params.at("attn.wv");
  Param& wo = params.at("attn.wo");
  AttentionGradients g{Matrix(T, dm), Matrix(L, dt)};
  Matrix gk(L, dh), gv(L, dh);
  std::vector<double> gctx(dh), gw(L), gq(dh);
  const double scale = cfg.scale();
  for (std::size_t i = 0; i < T; ++i) {
    const auto go = grad_out.row(i);
    linalg::outer_acc(go, tr.context.row(i), wo.grad);
    std::fill(gctx.begin(), gctx.end(), 0.0);
    linalg::affine_t_acc(wo.value, dm, dh, go, gctx);
    const auto wrow = tr.weights.row(i);
    double wsum = 0.0;
    for (std::size_t j = 0; j < L; ++j) {
      gw[j] = linalg::dot(gctx, tr.v.row(j));
      wsum += wrow[j] * gw[j];
      for (std::size_t d = 0; d < dh; ++d) gv(j, d) += wrow[j] * gctx[d];
    }
    std::fill(gq.begin(), gq.end(), 0.0);
    for (std::size_t j = 0; j < L; ++j) {
      const double gs = wrow[j] * (gw[j] - wsum) * scale;
      for (std::size_t d = 0; d < dh; ++d) {
        gq[d] += gs * tr.k(j, d);
        gk(j, d) += gs * tr.q(i, d);
      }
    }
    linalg::outer_acc(gq, frames.row(i), wq.grad);
    linalg::affine_t_acc(wq.value, dh, dm, gq, g.grad_frames.row(i));
  }
  for (std::size_t j = 0; j < L; ++j) {
    linalg::outer_acc(gk.row(j), text.tokens.row(j), wk.grad);
    linalg::outer_acc(gv.row(j), text.tokens.row(j), wv.grad);
    linalg::affine_t_acc(wk.value, dh, dt, gk.row(j), g.grad_tokens.row(j));
    linalg::affine_t_acc(wv.value, dh, dt, gv.row(j), g.grad_tokens.row(j));
  }
  return g;
}

// ---------------------------------------------------------------------------
// Fusion projection

/// out_i = W_F [ssm_i ; attn_i] + b_F. A branch with zero rows is treated as
/// all zeros (ablation variants).
inline Matrix fuse(const Matrix& ssm_branch, const Matrix& attn_branch, const ParamStore& params,
                   const ExecPolicy& exec = {}) {
  const bool has_s = ssm_branch.rows != 0, has_a = attn_branch.rows != 0;
  if (!has_s && !has_a) throw InvalidArgument("fuse needs at least one branch");
  const Matrix& any = has_s ? ssm_branch : attn_branch;
  const std::size_t T = any.rows, d = any.cols;
  if ((has_s && (ssm_branch.rows != T || ssm_branch.cols != d)) ||
      (has_a && (attn_branch.rows != T || attn_branch.cols != d)))
    throw InvalidArgument("fuse branch shapes differ");
  const Param& w = params.at("fuse.weight");
  const Param& b = params.at("fuse.bias");
  if (w.shape != std::vector<std::size_t>{d, 2 * d} || b.shape != std::vector<std::size_t>{d})
    throw InvalidArgument("fuse.weight " + shape_string(w.shape) + " does not match d_model " +
                          std::to_string(d));
  Matrix out(T, d);
  parallel_for(T, exec, [&](std::size_t tb, std::size_t te) {
    for (std::size_t t = tb; t < te; ++t) {
      auto y = out.row(t);
      for (std::size_t r = 0; r < d; ++r) {
        const double* wr = w.value.data() + r * 2 * d;
        double acc = b.value[r];
        if (has_s) {
          const auto s = ssm_branch.row(t);
          for (std::size_t c = 0; c < d; ++c) acc += wr[c] * s[c];
        }
        if (has_a) {
          const auto a = attn_branch.row(t);
          for (std::size_t c = 0; c < d; ++c) acc += wr[d + c] * a[c];
        }
        y[r] = acc;
      }
    }
  });
  return out;
}

struct FuseGradients {
  Matrix grad_ssm;
  Matrix grad_attn;
};

inline FuseGradients fuse_backward(const Matrix& ssm_branch, const Matrix& attn_branch,
                                   const Matrix& grad_out, ParamStore& params) {
  const std::size_t T = grad_out.rows, d = grad_out.cols;
  Param& w = params.at("fuse.weight");
  Param& b = params.at("fuse.bias");
  const bool has_s = ssm_branch.rows != 0, has_a = attn_branch.rows != 0;
  FuseGradients g{has_s ? Matrix(T, d) : Matrix(), has_a ? Matrix(T, d) : Matrix()};
  for (std::size_t t = 0; t < T; ++t) {
    const auto go = grad_out.row(t);
    for (std::size_t r = 0; r < d; ++r) {
      const double gr = go[r];
      if (gr == 0.0) continue;
      b.grad[r] += gr;
      const double* wr = w.value.data() + r * 2 * d;
      double* gwr = w.grad.data() + r * 2 * d;
      if (has_s) {
        const auto s = ssm_branch.row(t);
        auto gs = g.grad_ssm.row(t);
        for (std::size_t c = 0; c < d; ++c) {
          gwr[c] += gr * s[c];
          gs[c] += gr * wr[c];
        }
      }
      if (has_a) {
        const auto a = attn_branch.row(t);
        auto ga = g.grad_attn.row(t);
        for (std::size_t c = 0; c < d; ++c) {
          gwr[d + c] += gr * a[c];
          ga[c] += gr * wr[d + c];
        }
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Whole layer

struct FusionTrace {
  FusionVariant variant = FusionVariant::transformer_ssm;
  Matrix input_flat;
  std::optional<GateParams> gates;
  HiddenStateGrid hidden;  // empty for pure_transformer
  Matrix ssm_flat;         // rows == 0 when the branch is off
  std::optional<AttentionTrace> attention;
  Matrix attn_flat;  // rows == 0 when the branch is off
  SpectralGrid output;
};

inline AttentionConfig attention_config_for(const SpectralGrid& grid, std::size_t d_head) {
  return {frame_width(grid.bins, grid.channels), d_head};
}

inline FusionTrace transformer_ssm_traced(const SpectralGrid& grid, const TextEmbedding& text,
                                          FusionVariant variant, const ParamStore& params,
                                          const AttentionConfig& cfg, const ExecPolicy& exec = {}) {
  FusionTrace tr;
  tr.variant = variant;
  tr.input_flat = flatten_frames(grid);
  if (uses_ssm(variant)) {
    tr.gates = compute_gates(text.pooled, params, grid.bins, grid.channels);
    tr.hidden = exec.threads > 1 ? ssm_scan_chunked(grid, *tr.gates, {64, exec})
                                 : ssm_scan(grid, *tr.gates);
    tr.ssm_flat = flatten_frames(tr.hidden);
  }
  if (uses_attention(variant)) {
    tr.attention = cross_attention_traced(tr.input_flat, text, params, cfg, exec);
    tr.attn_flat = tr.attention->output;
  }
  tr.output = unflatten_frames(fuse(tr.ssm_flat, tr.attn_flat, params, exec), grid);
  return tr;
}

/// z'_i = SSM(z_i) (+) Attn(z_i, e_T); output has the input grid's shape.
/// Single-threaded calls stream frame by frame, carrying only the recurrent
/// state, with the same arithmetic order as the traced path (bit-identical).
/// The whole-sequence buffers of the traced path fall out of cache at long T.
inline SpectralGrid transformer_ssm_forward(const SpectralGrid& grid, const TextEmbedding& text,
                                            FusionVariant variant, const ParamStore& params,
                                            std::size_t d_head = 16, const ExecPolicy& exec = {}) {
  const AttentionConfig cfg = attention_config_for(grid, d_head);
  if (exec.threads > 1) return transformer_ssm_traced(grid, text, variant, params, cfg, exec).output;

  const std::size_t T = grid.frames, F = grid.bins, C = grid.channels, lanes = F * C;
  const std::size_t dm = cfg.d_model, dh = cfg.d_head;
  const bool has_s = uses_ssm(variant), has_a = uses_attention(variant);

  std::optional<GateParams> gates;
  if (has_s) gates = compute_gates(text.pooled, params, F, C);
  std::optional<AttentionWeights> aw;
  Matrix k, v;
  if (has_a) {
    if (text.length() == 0) throw InvalidArgument("cross-attention needs at least one text token");
    aw.emplace(attention_weights(params, cfg, text.dim()));
    k = Matrix(text.length(), dh);
    v = Matrix(text.length(), dh);
    for (std::size_t j = 0; j < text.length(); ++j) {
      linalg::affine(aw->wk.value, dh, text.dim(), text.tokens.row(j), {}, k.row(j));
      linalg::affine(aw->wv.value, dh, text.dim(), text.tokens.row(j), {}, v.row(j));
    }
  }
  const Param& w = params.at("fuse.weight");
  const Param& b = params.at("fuse.bias");
  if (w.shape != std::vector<std::size_t>{dm, 2 * dm} || b.shape != std::vector<std::size_t>{dm})
    throw InvalidArgument("fuse.weight " + shape_string(w.shape) + " does not match d_model " +
                          std::to_string(dm));

  SpectralGrid out = grid;
  std::vector<cplx> state(lanes);
  std::vector<double> x(dm), s(dm), a(dm), q(dh), ctx(dh), wrow(text.length()), y(dm);
  const double scale = cfg.scale();
  for (std::size_t t = 0; t < T; ++t) {
    const cplx* in = grid.data.data() + t * lanes;
    if (has_s) {
      for (std::size_t l = 0; l < lanes; ++l) {
        state[l] = gates->alpha[l] * state[l] + gates->beta[l] * in[l];
        const std::size_t col = ((l % C) * F + l / C) * 2;
        s[col] = state[l].real();
        s[col + 1] = state[l].imag();
      }
    }
    if (has_a) {
      for (std::size_t l = 0; l < lanes; ++l) {
        const std::size_t col = ((l % C) * F + l / C) * 2;
        x[col] = in[l].real();
        x[col + 1] = in[l].imag();
      }
      linalg::affine(aw->wq.value, dh, dm, x, {}, q);
      for (std::size_t j = 0; j < wrow.size(); ++j) wrow[j] = scale * linalg::dot(q, k.row(j));
      linalg::softmax(wrow);
      std::fill(ctx.begin(), ctx.end(), 0.0);
      for (std::size_t j = 0; j < wrow.size(); ++j)
        for (std::size_t d = 0; d < dh; ++d) ctx[d] += wrow[j] * v(j, d);
      linalg::affine(aw->wo.value, dm, dh, ctx, {}, a);
    }
    for (std::size_t r = 0; r < dm; ++r) {
      const double* wr = w.value.data() + r * 2 * dm;
      double acc = b.value[r];
      if (has_s)
        for (std::size_t c = 0; c < dm; ++c) acc += wr[c] * s[c];
      if (has_a)
        for (std::size_t c = 0; c < dm; ++c) acc += wr[dm + c] * a[c];
      y[r] = acc;
    }
    cplx* o = out.data.data() + t * lanes;
    for (std::size_t l = 0; l < lanes; ++l) {
      const std::size_t col = ((l % C) * F + l / C) * 2;
      o[l] = {y[col], y[col + 1]};
    }
  }
  return out;
}

struct FusionGradients {
  std::vector<cplx> grad_input;  // grid layout
  Matrix grad_tokens;            // L x d_text, zero rows when attention is off
  std::vector<double> grad_pooled;
};

/// `grad_hidden`, when non-empty, is an extra gradient on the hidden states
/// (from the smoothness loss).
inline FusionGradients transformer_ssm_backward(const SpectralGrid& grid, const TextEmbedding& text,
                                                const FusionTrace& tr,
                                                const std::vector<cplx>& grad_output,
                                                std::span<const cplx> grad_hidden,
                                                ParamStore& params, const AttentionConfig& cfg) {
  Matrix g_fused = flatten_states(grid, grad_output);
  FuseGradients gf = fuse_backward(tr.ssm_flat, tr.attn_flat, g_fused, params);
  FusionGradients out{std::vector<cplx>(grid.data.size()), Matrix(),
                      std::vector<double>(text.dim(), 0.0)};
  if (uses_attention(tr.variant)) {
    AttentionGradients ga =
        cross_attention_backward(tr.input_flat, text, *tr.attention, gf.grad_attn, params, cfg);
    out.grad_input = unflatten_states(ga.grad_frames, grid.bins, grid.channels);
    out.grad_tokens = std::move(ga.grad_tokens);
  }
  if (uses_ssm(tr.variant)) {
    std::vector<cplx> gh = unflatten_states(gf.grad_ssm, grid.bins, grid.channels);
    if (!grad_hidden.empty())
      for (std::size_t i = 0; i < gh.size(); ++i) gh[i] += grad_hidden[i];
    ScanGradients gs = ssm_scan_backward(grid, *tr.gates, gh);
    for (std::size_t i = 0; i < gs.grad_x.size(); ++i) out.grad_input[i] += gs.grad_x[i];
    out.grad_pooled = compute_gates_backward(text.pooled, gs.grad_alpha, gs.grad_beta, params);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Quadratic reference: frames attend to frames. Scores are formed row by row so
// memory stays O(T * d_head).

struct SelfAttentionWeights {
  Matrix wq, wk, wv;  // d_head x d_model
  Matrix wo;          // d_model x d_head
};

inline Matrix frame_self_attention(const Matrix& frames, const SelfAttentionWeights& w,
                                   const ExecPolicy& exec = {}) {
  const std::size_t T = frames.rows, dm = frames.cols, dh = w.wq.rows;
  Matrix q(T, dh), k(T, dh), v(T, dh), out(T, dm);
  for (std::size_t t = 0; t < T; ++t) {
    linalg::affine(w.wq.data, dh, dm, frames.row(t), {}, q.row(t));
    linalg::affine(w.wk.data, dh, dm, frames.row(t), {}, k.row(t));
    linalg::affine(w.wv.data, dh, dm, frames.row(t), {}, v.row(t));
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  parallel_for(T, exec, [&](std::size_t b, std::size_t e) {
    std::vector<double> s(T), ctx(dh);
    for (std::size_t i = b; i < e; ++i) {
      for (std::size_t j = 0; j < T; ++j) s[j] = scale * linalg::dot(q.row(i), k.row(j));
      linalg::softmax(s);
      std::fill(ctx.begin(), ctx.end(), 0.0);
      for (std::size_t j = 0; j < T; ++j)
        for (std::size_t d = 0; d < dh; ++d) ctx[d] += s[j] * v(j, d);
      linalg::affine(w.wo.data, dm, dh, ctx, {}, out.row(i));
    }
  });
  return out;
}

/// Transformer-SSM layer with the text cross-attention replaced by frame
/// self-attention.
inline SpectralGrid quadratic_reference_forward(const SpectralGrid& grid, const TextEmbedding& text,
                                                const ParamStore& params,
                                                const SelfAttentionWeights& self,
                                                const ExecPolicy& exec = {}) {
  const GateParams gates = compute_gates(text.pooled, params, grid.bins, grid.channels);
  const HiddenStateGrid h =
      exec.threads > 1 ? ssm_scan_chunked(grid, gates, {64, exec}) : ssm_scan(grid, gates);
  const Matrix attn = frame_self_attention(flatten_frames(grid), self, exec);
  return unflatten_frames(fuse(flatten_frames(h), attn, params, exec), grid);
}

}  // namespace ssmstyler
