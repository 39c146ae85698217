#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dsp.hpp"
#include "error.hpp"
#include "linalg.hpp"
#include "params.hpp"

namespace ssmstyler {

struct DecoderLayer {
  std::size_t in_channels;
  std::size_t out_channels;
  std::size_t kernel_size;
  std::size_t upsample;
};

/// Transposed-convolution stack; hidden layers use tanh, the last is linear
/// and clamped to [-1, 1].
struct DecoderSpec {
  std::vector<DecoderLayer> layers;

  static DecoderSpec default_decoder() { return {{{8, 8, 8, 4}, {8, 1, 8, 4}}}; }

  std::size_t upsample_factor() const {
    std::size_t s = 1;
    for (const auto& l : layers) s *= l.upsample;
    return s;
  }

  void validate(std::size_t latent_dim, std::size_t stride_samples) const {
    if (layers.empty()) throw InvalidConfig("decoder needs at least one layer");
    if (layers.front().in_channels != latent_dim)
      throw InvalidConfig("decoder input channels do not match D_latent");
    if (layers.back().out_channels != 1) throw InvalidConfig("decoder must end in one channel");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      if (!l.in_channels || !l.out_channels || !l.kernel_size || !l.upsample)
        throw InvalidConfig("decoder layer " + std::to_string(i) + " has a zero dimension");
      if (i && layers[i - 1].out_channels != l.in_channels)
        throw InvalidConfig("decoder layer " + std::to_string(i) + " channel mismatch");
    }
    if (upsample_factor() != stride_samples)
      throw InvalidConfig("decoder upsampling " + std::to_string(upsample_factor()) +
                          " != encoder stride " + std::to_string(stride_samples));
  }
};

inline std::string dec_weight_name(std::size_t i) { return "dec.layer" + std::to_string(i) + ".weight"; }
inline std::string dec_bias_name(std::size_t i) { return "dec.layer" + std::to_string(i) + ".bias"; }

/// Inverse STFT per channel; channels become latent dimensions.
inline LatentSequence latent_from_grid(const SpectralGrid& grid, std::size_t stride_samples = 1) {
  LatentSequence z{Matrix(grid.original_length, grid.channels), stride_samples};
  for (std::size_t c = 0; c < grid.channels; ++c) {
    const auto col = istft_channel(grid, c);
    for (std::size_t t = 0; t < col.size(); ++t) z.frames(t, c) = col[t];
  }
  return z;
}

/// Transposed convolution cropped to T * upsample outputs.
/// input T x C_in, weight [C_in][C_out][K].
inline Matrix conv_transpose1d_forward(const Matrix& input, std::span<const double> weight,
                                       std::span<const double> bias, std::size_t kernel_size,
                                       std::size_t upsample) {
  const std::size_t T = input.rows, cin = input.cols, cout = bias.size(), tout = T * upsample;
  if (weight.size() != cin * cout * kernel_size)
    throw InvalidConfig("transposed conv weight shape mismatch");
  Matrix out(tout, cout);
  for (std::size_t n = 0; n < tout; ++n)
    for (std::size_t o = 0; o < cout; ++o) out(n, o) = bias[o];
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < cin; ++i) {
      const double x = input(t, i);
      if (x == 0.0) continue;
      for (std::size_t o = 0; o < cout; ++o) {
        const double* w = weight.data() + (i * cout + o) * kernel_size;
        for (std::size_t k = 0; k < kernel_size; ++k) {
          const std::size_t n = t * upsample + k;
          if (n >= tout) break;
          out(n, o) += x * w[k];
        }
      }
    }
  return out;
}

inline Matrix conv_transpose1d_backward(const Matrix& input, std::span<const double> weight,
                                        const Matrix& grad_out, std::size_t kernel_size,
                                        std::size_t upsample, std::span<double> grad_weight,
                                        std::span<double> grad_bias) {
  const std::size_t T = input.rows, cin = input.cols, cout = grad_out.cols, tout = grad_out.rows;
  Matrix gin(T, cin);
  for (std::size_t n = 0; n < tout; ++n)
    for (std::size_t o = 0; o < cout; ++o) grad_bias[o] += grad_out(n, o);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < cin; ++i) {
      const double x = input(t, i);
      double acc = 0.0;
      for (std::size_t o = 0; o < cout; ++o) {
        const std::size_t off = (i * cout + o) * kernel_size;
        for (std::size_t k = 0; k < kernel_size; ++k) {
          const std::size_t n = t * upsample + k;
          if (n >= tout) break;
          const double g = grad_out(n, o);
          acc += g * weight[off + k];
          grad_weight[off + k] += g * x;
        }
      }
      gin(t, i) = acc;
    }
  return gin;
}

struct DecoderTrace {
  std::vector<Matrix> inputs;
  std::vector<Matrix> preact;
  std::vector<double> unclamped;  // final linear output
  Waveform waveform;
};

inline DecoderTrace decode_waveform_traced(const LatentSequence& latent, const DecoderSpec& spec,
                                           const ParamStore& params, int sample_rate_hz = 8000) {
  spec.validate(latent.dim(), latent.stride_samples);
  DecoderTrace tr;
  Matrix x = latent.frames;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const Param& w = params.at(dec_weight_name(i));
    const Param& b = params.at(dec_bias_name(i));
    if (w.shape != std::vector<std::size_t>{l.in_channels, l.out_channels, l.kernel_size} ||
        b.shape != std::vector<std::size_t>{l.out_channels})
      throw InvalidConfig("decoder layer " + std::to_string(i) + " parameters do not match spec");
    Matrix pre = conv_transpose1d_forward(x, w.value, b.value, l.kernel_size, l.upsample);
    Matrix act = pre;
    if (i + 1 < spec.layers.size())
      for (double& v : act.data) v = std::tanh(v);
    tr.inputs.push_back(std::move(x));
    tr.preact.push_back(std::move(pre));
    x = std::move(act);
  }
  tr.unclamped = x.data;
  tr.waveform.sample_rate_hz = sample_rate_hz;
  tr.waveform.samples.resize(x.data.size());
  std::transform(x.data.begin(), x.data.end(), tr.waveform.samples.begin(),
                 [](double v) { return std::clamp(v, -1.0, 1.0); });
  return tr;
}

/// Latent -> waveform of T_latent * stride_samples samples in [-1, 1].
inline Waveform decode_waveform(const LatentSequence& latent, const DecoderSpec& spec,
                                const ParamStore& params, int sample_rate_hz = 8000) {
  return decode_waveform_traced(latent, spec, params, sample_rate_hz).waveform;
}

/// Backward from a gradient on the unclamped output. Returns the latent gradient.
inline Matrix decode_waveform_backward(const DecoderTrace& tr, const DecoderSpec& spec,
                                       std::span<const double> grad_unclamped, ParamStore& params) {
  Matrix g(grad_unclamped.size(), 1);
  g.data.assign(grad_unclamped.begin(), grad_unclamped.end());
  for (std::size_t ii = spec.layers.size(); ii-- > 0;) {
    const auto& l = spec.layers[ii];
    if (ii + 1 < spec.layers.size()) {
      const Matrix& pre = tr.preact[ii];
      for (std::size_t j = 0; j < g.data.size(); ++j) {
        const double th = std::tanh(pre.data[j]);
        g.data[j] *= 1.0 - th * th;
      }
    }
    Param& w = params.at(dec_weight_name(ii));
    Param& b = params.at(dec_bias_name(ii));
    g = conv_transpose1d_backward(tr.inputs[ii], w.value, g, l.kernel_size, l.upsample, w.grad, b.grad);
  }
  return g;
}

}  // namespace ssmstyler
