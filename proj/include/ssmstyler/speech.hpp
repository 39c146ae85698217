#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dsp.hpp"
#include "error.hpp"
#include "linalg.hpp"
#include "params.hpp"
#include "text.hpp"

namespace ssmstyler {

enum class Activation { tanh, identity };

struct ConvLayer {
  std::size_t in_channels;
  std::size_t out_channels;
  std::size_t kernel_size;
  std::size_t stride;
  Activation activation = Activation::tanh;
};

/// Stack of valid (unpadded) strided 1-D convolutions.
struct ConvSpec {
  std::vector<ConvLayer> layers;

  static ConvSpec default_encoder() {
    return {{{1, 8, 9, 4, Activation::tanh}, {8, 8, 5, 4, Activation::identity}}};
  }

  void validate() const {
    if (layers.empty()) throw InvalidConfig("encoder needs at least one layer");
    if (layers.front().in_channels != 1) throw InvalidConfig("encoder input must be mono");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      if (!l.in_channels || !l.out_channels || !l.kernel_size || !l.stride)
        throw InvalidConfig("encoder layer " + std::to_string(i) + " has a zero dimension");
      if (i && layers[i - 1].out_channels != l.in_channels)
        throw InvalidConfig("encoder layer " + std::to_string(i) + " channel mismatch");
    }
  }

  std::size_t latent_dim() const { return layers.back().out_channels; }

  std::size_t stride_samples() const {
    std::size_t s = 1;
    for (const auto& l : layers) s *= l.stride;
    return s;
  }

  static std::size_t layer_output_length(std::size_t in, const ConvLayer& l) {
    return in < l.kernel_size ? 0 : (in - l.kernel_size) / l.stride + 1;
  }

  std::size_t output_length(std::size_t samples) const {
    for (const auto& l : layers) samples = layer_output_length(samples, l);
    return samples;
  }

  // Shortest input that yields one output frame.
  std::size_t min_input_length() const {
    std::size_t need = 1;
    for (auto it = layers.rbegin(); it != layers.rend(); ++it)
      need = (need - 1) * it->stride + it->kernel_size;
    return need;
  }
};

/// Valid cross-correlation along time. input T x C_in, weight [C_out][C_in][K].
/// Returns the pre-activation output T' x C_out.
inline Matrix conv1d_forward(const Matrix& input, std::span<const double> weight,
                             std::span<const double> bias, std::size_t kernel_size,
                             std::size_t stride) {
  const std::size_t cin = input.cols, cout = bias.size();
  if (kernel_size == 0 || stride == 0) throw InvalidArgument("kernel and stride must be positive");
  if (input.rows < kernel_size)
    throw InvalidArgument("conv1d input of length " + std::to_string(input.rows) +
                          " is shorter than kernel " + std::to_string(kernel_size));
  if (weight.size() != cout * cin * kernel_size) throw InvalidArgument("conv1d weight shape mismatch");
  const std::size_t tout = (input.rows - kernel_size) / stride + 1;
  Matrix out(tout, cout);
  for (std::size_t t = 0; t < tout; ++t) {
    const std::size_t base = t * stride;
    for (std::size_t o = 0; o < cout; ++o) {
      double acc = bias[o];
      const double* w = weight.data() + o * cin * kernel_size;
      for (std::size_t i = 0; i < cin; ++i)
        for (std::size_t k = 0; k < kernel_size; ++k)
          acc += w[i * kernel_size + k] * input(base + k, i);
      out(t, o) = acc;
    }
  }
  return out;
}

/// Backward of conv1d_forward given the gradient on the pre-activation output.
/// Accumulates into grad_weight / grad_bias and returns the input gradient.
inline Matrix conv1d_backward(const Matrix& input, std::span<const double> weight,
                              const Matrix& grad_out, std::size_t kernel_size, std::size_t stride,
                              std::span<double> grad_weight, std::span<double> grad_bias) {
  const std::size_t cin = input.cols, cout = grad_out.cols;
  Matrix gin(input.rows, cin);
  for (std::size_t t = 0; t < grad_out.rows; ++t) {
    const std::size_t base = t * stride;
    for (std::size_t o = 0; o < cout; ++o) {
      const double g = grad_out(t, o);
      if (g == 0.0) continue;
      grad_bias[o] += g;
      const double* w = weight.data() + o * cin * kernel_size;
      double* gw = grad_weight.data() + o * cin * kernel_size;
      for (std::size_t i = 0; i < cin; ++i)
        for (std::size_t k = 0; k < kernel_size; ++k) {
          gw[i * kernel_size + k] += g * input(base + k, i);
          gin(base + k, i) += g * w[i * kernel_size + k];
        }
    }
  }
  return gin;
}

inline std::string enc_weight_name(std::size_t i) { return "enc.layer" + std::to_string(i) + ".weight"; }
inline std::string enc_bias_name(std::size_t i) { return "enc.layer" + std::to_string(i) + ".bias"; }

/// Per-layer inputs and pre-activations kept for the backward pass.
struct EncoderTrace {
  std::vector<Matrix> inputs;
  std::vector<Matrix> preact;
  LatentSequence output;
};

inline EncoderTrace encode_speech_traced(const Waveform& w, const ConvSpec& spec,
                                         const ParamStore& params) {
  spec.validate();
  const std::size_t need = spec.min_input_length();
  if (w.samples.size() < need)
    throw InvalidArgument("waveform of " + std::to_string(w.samples.size()) +
                          " samples is too short; encoder needs at least " + std::to_string(need));
  EncoderTrace tr;
  Matrix x(w.samples.size(), 1);
  x.data = w.samples;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const Param& wt = params.expect(enc_weight_name(i), {l.out_channels, l.in_channels, l.kernel_size});
    const Param& b = params.expect(enc_bias_name(i), {l.out_channels});
    Matrix pre = conv1d_forward(x, wt.value, b.value, l.kernel_size, l.stride);
    Matrix act = pre;
    if (l.activation == Activation::tanh)
      for (double& v : act.data) v = std::tanh(v);
    tr.inputs.push_back(std::move(x));
    tr.preact.push_back(std::move(pre));
    x = std::move(act);
  }
  tr.output.frames = std::move(x);
  tr.output.stride_samples = spec.stride_samples();
  return tr;
}

/// F_S: waveform -> latent sequence z.
inline LatentSequence encode_speech(const Waveform& w, const ConvSpec& spec,
                                    const ParamStore& params) {
  return encode_speech_traced(w, spec, params).output;
}

inline void encode_speech_backward(const EncoderTrace& tr, const ConvSpec& spec,
                                   const Matrix& grad_latent, ParamStore& params) {
  Matrix g = grad_latent;
  for (std::size_t ii = spec.layers.size(); ii-- > 0;) {
    const auto& l = spec.layers[ii];
    if (l.activation == Activation::tanh) {
      const Matrix& pre = tr.preact[ii];
      for (std::size_t j = 0; j < g.data.size(); ++j) {
        const double th = std::tanh(pre.data[j]);
        g.data[j] *= 1.0 - th * th;
      }
    }
    Param& wt = params.at(enc_weight_name(ii));
    Param& b = params.at(enc_bias_name(ii));
    g = conv1d_backward(tr.inputs[ii], wt.value, g, l.kernel_size, l.stride, wt.grad, b.grad);
  }
}

/// Temporal mean of the latent frames.
inline std::vector<double> mean_pool(const LatentSequence& z) {
  std::vector<double> m(z.dim(), 0.0);
  for (std::size_t t = 0; t < z.length(); ++t)
    for (std::size_t c = 0; c < z.dim(); ++c) m[c] += z.frames(t, c);
  for (double& v : m) v /= static_cast<double>(z.length());
  return m;
}

inline std::vector<double> style_audio_preactivation(const LatentSequence& z,
                                                     const ParamStore& params) {
  const Param& w = params.at("phi_audio.weight");
  if (w.shape.size() != 2 || w.shape[1] != z.dim())
    throw InvalidConfig("phi_audio.weight does not match D_latent");
  const Param& b = params.expect("phi_audio.bias", {w.shape[0]});
  const auto pooled = mean_pool(z);
  std::vector<double> v(w.shape[0]);
  linalg::affine(w.value, w.shape[0], w.shape[1], pooled, b.value, v);
  return v;
}

/// phi_audio: mean-pool over time, affine map, L2 normalise.
inline std::vector<double> project_style_audio(const LatentSequence& z, const ParamStore& params) {
  if (z.length() == 0) throw InvalidArgument("empty latent sequence");
  if (linalg::norm(mean_pool(z)) == 0.0)
    throw DegenerateEmbedding("mean-pooled latent is exactly zero");
  return l2_normalize(style_audio_preactivation(z, params));
}

// Pulls a gradient on the unit output back into phi_audio and the latent frames.
inline void project_style_audio_backward(const LatentSequence& z, std::span<const double> grad_unit,
                                         ParamStore& params, Matrix& grad_frames) {
  const auto pooled = mean_pool(z);
  const auto pre = style_audio_preactivation(z, params);
  const auto gpre = l2_normalize_backward(pre, grad_unit);
  Param& w = params.at("phi_audio.weight");
  Param& b = params.at("phi_audio.bias");
  linalg::outer_acc(gpre, pooled, w.grad);
  for (std::size_t i = 0; i < gpre.size(); ++i) b.grad[i] += gpre[i];
  std::vector<double> gpool(z.dim(), 0.0);
  linalg::affine_t_acc(w.value, w.shape[0], w.shape[1], gpre, gpool);
  const double inv = 1.0 / static_cast<double>(z.length());
  for (std::size_t t = 0; t < z.length(); ++t)
    for (std::size_t c = 0; c < z.dim(); ++c) grad_frames(t, c) += gpool[c] * inv;
}

}  // namespace ssmstyler
