#pragma once

// End-to-end pipeline: text encoder, speech encoder, STFT, Transformer-SSM
// layer, inverse STFT, losses, and the decoder, with the reverse pass that
// fills ParamStore gradients.

#include <optional>
#include <string>
#include <vector>

#include "decoder.hpp"
#include "dsp.hpp"
#include "fusion.hpp"
#include "losses.hpp"
#include "params.hpp"
#include "speech.hpp"
#include "ssm.hpp"
#include "text.hpp"

namespace ssmstyler {

struct ModelConfig {
  int sample_rate_hz = 8000;
  ConvSpec encoder = ConvSpec::default_encoder();
  StftConfig stft{64, 16, WindowKind::hann};
  DecoderSpec decoder = DecoderSpec::default_decoder();
  std::size_t vocab_size = Vocabulary::builtin().size();
  std::size_t d_text = 16;
  std::size_t d_style = 8;
  std::size_t d_head = 16;
  std::size_t n_classes = 3;

  std::size_t latent_dim() const { return encoder.latent_dim(); }
  std::size_t bins() const { return stft.bins(); }
  std::size_t lanes() const { return bins() * latent_dim(); }
  std::size_t d_model() const { return frame_width(bins(), latent_dim()); }
  AttentionConfig attention() const { return {d_model(), d_head}; }

  void validate() const {
    encoder.validate();
    stft.validate();
    decoder.validate(latent_dim(), encoder.stride_samples());
    if (!vocab_size || !d_text || !d_style || !d_head || n_classes < 2)
      throw InvalidConfig("model dimensions must be positive (and n_classes >= 2)");
  }

  static ModelConfig defaults() { return {}; }

  // Small enough for exhaustive finite-difference checks.
  static ModelConfig tiny() {
    ModelConfig c;
    c.encoder = {{{1, 4, 9, 4, Activation::tanh}, {4, 3, 5, 4, Activation::identity}}};
    c.stft = {16, 4, WindowKind::hann};
    c.decoder = {{{3, 4, 8, 4}, {4, 1, 8, 4}}};
    c.d_text = 8;
    c.d_style = 4;
    c.d_head = 4;
    return c;
  }
};

/// Deterministic initialisation: weights ~ U[-a, a], a = sqrt(1/fan_in); all
/// biases (including the gate biases) start at zero.
inline ParamStore init_params(std::uint64_t seed, const ModelConfig& cfg) {
  cfg.validate();
  ParamStore p;
  Rng rng(seed);
  const std::size_t D = cfg.latent_dim(), dm = cfg.d_model(), lanes = cfg.lanes();
  auto weight = [&](const std::string& name, std::vector<std::size_t> shape, std::size_t fan_in) {
    init_uniform(p.add(name, std::move(shape)), fan_in, rng);
  };
  auto bias = [&](const std::string& name, std::size_t n) { p.add(name, {n}); };

  // a lookup row sees a single one-hot input, so fan_in is 1
  weight("text.embedding", {cfg.vocab_size, cfg.d_text}, 1);
  for (std::size_t i = 0; i < cfg.encoder.layers.size(); ++i) {
    const auto& l = cfg.encoder.layers[i];
    weight(enc_weight_name(i), {l.out_channels, l.in_channels, l.kernel_size},
           l.in_channels * l.kernel_size);
    bias(enc_bias_name(i), l.out_channels);
  }
  weight("phi_audio.weight", {cfg.d_style, D}, D);
  bias("phi_audio.bias", cfg.d_style);
  weight("phi_text.weight", {cfg.d_style, cfg.d_text}, cfg.d_text);
  bias("phi_text.bias", cfg.d_style);
  weight("gate.alpha.weight", {lanes, cfg.d_text}, cfg.d_text);
  bias("gate.alpha.bias", lanes);
  weight("gate.beta.weight", {lanes, cfg.d_text}, cfg.d_text);
  bias("gate.beta.bias", lanes);
  weight("attn.wq", {cfg.d_head, dm}, dm);
  weight("attn.wk", {cfg.d_head, cfg.d_text}, cfg.d_text);
  weight("attn.wv", {cfg.d_head, cfg.d_text}, cfg.d_text);
  weight("attn.wo", {dm, cfg.d_head}, cfg.d_head);
  weight("fuse.weight", {dm, 2 * dm}, 2 * dm);
  bias("fuse.bias", dm);
  for (std::size_t i = 0; i < cfg.decoder.layers.size(); ++i) {
    const auto& l = cfg.decoder.layers[i];
    weight(dec_weight_name(i), {l.in_channels, l.out_channels, l.kernel_size},
           l.in_channels * l.kernel_size);
    bias(dec_bias_name(i), l.out_channels);
  }
  weight("content.weight", {cfg.n_classes, D}, D);
  bias("content.bias", cfg.n_classes);
  return p;
}

/// Throws CorruptCheckpoint unless `params` has exactly the shapes init_params
/// would create for `cfg`.
inline void check_params_match(const ParamStore& params, const ModelConfig& cfg) {
  const ParamStore ref = init_params(0, cfg);
  for (const auto& [name, p] : ref) {
    if (!params.contains(name)) throw CorruptCheckpoint("checkpoint lacks parameter '" + name + "'");
    if (params.at(name).shape != p.shape)
      throw CorruptCheckpoint("parameter '" + name + "' has shape " +
                              shape_string(params.at(name).shape) + ", model expects " +
                              shape_string(p.shape));
  }
  if (params.size() != ref.size()) throw CorruptCheckpoint("checkpoint has unexpected parameters");
}

/// How the decoder takes part in a training step.
enum class DecoderCoupling {
  none,      // decoder not run
  detached,  // reconstruction loss trains the decoder only
  joint,     // reconstruction gradient also flows upstream (gradient checks)
};

struct ForwardPass {
  TextEmbedding text;
  EncoderTrace encoder;
  SpectralGrid spectrum;
  FusionTrace fusion;
  LatentSequence styled;  // decoder-input latent
  std::vector<double> audio_pre, text_pre;
  std::vector<double> audio_emb, text_emb;
  std::optional<DecoderTrace> decoder;
  double recon = 0.0;
  LossReport report;

  double objective(DecoderCoupling c) const {
    return report.total + (c == DecoderCoupling::none ? 0.0 : recon);
  }
};

inline ForwardPass forward_pass(const ModelConfig& cfg, const ParamStore& params, const Waveform& wav,
                                const TokenSequence& tokens, std::span<const int> labels,
                                FusionVariant variant, const LossWeights& weights,
                                DecoderCoupling coupling = DecoderCoupling::none) {
  ForwardPass fp;
  fp.text = embed_text(tokens, params);
  fp.encoder = encode_speech_traced(wav, cfg.encoder, params);
  fp.spectrum = stft_multi(fp.encoder.output, cfg.stft);
  fp.fusion = transformer_ssm_traced(fp.spectrum, fp.text, variant, params, cfg.attention());
  fp.styled = latent_from_grid(fp.fusion.output, cfg.encoder.stride_samples());

  fp.audio_pre = style_audio_preactivation(fp.styled, params);
  fp.text_pre = style_text_preactivation(fp.text, params);
  fp.audio_emb = l2_normalize(fp.audio_pre);
  fp.text_emb = l2_normalize(fp.text_pre);

  const double content = content_loss(fp.styled, labels, params);
  const double style = style_loss(fp.audio_emb, fp.text_emb);
  const double smooth = uses_ssm(variant) ? smoothness_loss(fp.fusion.hidden) : 0.0;
  fp.report = make_report(content, style, smooth, weights);

  if (coupling != DecoderCoupling::none) {
    fp.decoder = decode_waveform_traced(fp.styled, cfg.decoder, params, wav.sample_rate_hz);
    const auto& y = fp.decoder->unclamped;
    double s = 0.0;
    for (std::size_t n = 0; n < y.size(); ++n) {
      const double d = y[n] - (n < wav.samples.size() ? wav.samples[n] : 0.0);
      s += d * d;
    }
    fp.recon = s / static_cast<double>(y.size());
  }
  return fp;
}

/// Accumulates d(objective)/d(param) into params' gradient arrays.
inline void backward_pass(const ModelConfig& cfg, const ForwardPass& fp, ParamStore& params,
                          const Waveform& wav, const TokenSequence& tokens,
                          std::span<const int> labels, const LossWeights& weights,
                          DecoderCoupling coupling = DecoderCoupling::none) {
  // Gradient on the decoder-input latent.
  Matrix g_styled = content_loss_backward(fp.styled, labels, params, weights.lambda_content);

  const StyleGradients gs = style_loss_backward(fp.audio_emb, fp.text_emb, weights.lambda_style);
  project_style_audio_backward(fp.styled, gs.grad_audio, params, g_styled);

  // phi_text
  std::vector<double> g_pooled(fp.text.dim(), 0.0);
  {
    const auto gpre = l2_normalize_backward(fp.text_pre, gs.grad_text);
    Param& w = params.at("phi_text.weight");
    Param& b = params.at("phi_text.bias");
    linalg::outer_acc(gpre, fp.text.pooled, w.grad);
    for (std::size_t i = 0; i < gpre.size(); ++i) b.grad[i] += gpre[i];
    linalg::affine_t_acc(w.value, w.shape[0], w.shape[1], gpre, g_pooled);
  }

  if (coupling != DecoderCoupling::none) {
    const auto& y = fp.decoder->unclamped;
    std::vector<double> gy(y.size());
    const double scale = 2.0 / static_cast<double>(y.size());
    for (std::size_t n = 0; n < y.size(); ++n)
      gy[n] = scale * (y[n] - (n < wav.samples.size() ? wav.samples[n] : 0.0));
    Matrix g_lat = decode_waveform_backward(*fp.decoder, cfg.decoder, gy, params);
    if (coupling == DecoderCoupling::joint)
      for (std::size_t i = 0; i < g_lat.data.size(); ++i) g_styled.data[i] += g_lat.data[i];
  }

  // inverse STFT -> fused grid
  const SpectralGrid g_fused = istft_multi_backward(g_styled, fp.fusion.output);
  std::vector<cplx> g_hidden;
  if (uses_ssm(fp.fusion.variant) && weights.lambda_smooth != 0.0)
    g_hidden = smoothness_loss_backward(fp.fusion.hidden, weights.lambda_smooth);
  FusionGradients gf = transformer_ssm_backward(fp.spectrum, fp.text, fp.fusion, g_fused.data,
                                                g_hidden, params, cfg.attention());
  for (std::size_t i = 0; i < g_pooled.size(); ++i) g_pooled[i] += gf.grad_pooled[i];
  embed_text_backward(tokens, gf.grad_tokens, g_pooled, params);

  // STFT -> encoder
  SpectralGrid g_spec = fp.spectrum;
  g_spec.data = std::move(gf.grad_input);
  const Matrix g_latent = stft_multi_backward(g_spec);
  encode_speech_backward(fp.encoder, cfg.encoder, g_latent, params);
}

/// Inference: styled latent and waveform for a prompt.
struct TransferResult {
  LatentSequence styled;
  Waveform waveform;
  std::vector<double> audio_emb;
  std::vector<double> text_emb;
};

inline TransferResult stylize(const ModelConfig& cfg, const ParamStore& params, const Waveform& wav,
                              const TokenSequence& tokens, FusionVariant variant,
                              const ExecPolicy& exec = {}) {
  const TextEmbedding text = embed_text(tokens, params);
  const LatentSequence z = encode_speech(wav, cfg.encoder, params);
  const SpectralGrid spec = stft_multi(z, cfg.stft);
  const SpectralGrid fused = transformer_ssm_forward(spec, text, variant, params, cfg.d_head, exec);
  TransferResult r;
  r.styled = latent_from_grid(fused, cfg.encoder.stride_samples());
  r.waveform = decode_waveform(r.styled, cfg.decoder, params, wav.sample_rate_hz);
  r.audio_emb = project_style_audio(r.styled, params);
  r.text_emb = project_style_text(text, params);
  return r;
}

}  // namespace ssmstyler
