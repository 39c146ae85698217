#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "linalg.hpp"

namespace ssmstyler {

using cplx = std::complex<double>;

/// Mono audio.
struct Waveform {
  std::vector<double> samples;
  int sample_rate_hz = 8000;

  void validate() const {
    if (sample_rate_hz <= 0) throw InvalidArgument("sample rate must be positive");
    for (double s : samples)
      if (!std::isfinite(s)) throw InvalidArgument("waveform contains non-finite samples");
  }
};

/// Latent sequence z: T_latent frames of D_latent features.
struct LatentSequence {
  Matrix frames;
  std::size_t stride_samples = 1;

  std::size_t length() const { return frames.rows; }
  std::size_t dim() const { return frames.cols; }
};

enum class WindowKind { hann };

struct StftConfig {
  std::size_t fft_size = 64;
  std::size_t hop = 16;
  WindowKind window = WindowKind::hann;

  std::size_t bins() const { return fft_size / 2 + 1; }
  // Zeros prepended before the first frame. Without it the first sample only
  // meets the window at w[0] == 0 and cannot be reconstructed.
  std::size_t head_pad() const { return fft_size / 2; }
  std::size_t frames_for(std::size_t length) const { return (length + hop - 1) / hop; }

  void validate() const {
    if (fft_size < 2 || (fft_size & (fft_size - 1)) != 0)
      throw InvalidArgument("fft_size must be a power of two >= 2, got " + std::to_string(fft_size));
    if (hop == 0 || hop > fft_size || fft_size % hop != 0)
      throw InvalidArgument("hop must divide fft_size");
  }

  friend bool operator==(const StftConfig&, const StftConfig&) = default;
};

/// Complex time x frequency x channel grid; index (t * bins + f) * channels + c.
struct SpectralGrid {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::size_t channels = 0;
  std::vector<cplx> data;
  StftConfig config;
  std::size_t original_length = 0;

  SpectralGrid() = default;
  SpectralGrid(std::size_t t, std::size_t f, std::size_t c, StftConfig cfg, std::size_t len)
      : frames(t), bins(f), channels(c), data(t * f * c), config(cfg), original_length(len) {}

  std::size_t index(std::size_t t, std::size_t f, std::size_t c) const {
    return (t * bins + f) * channels + c;
  }
  cplx& at(std::size_t t, std::size_t f, std::size_t c) { return data[index(t, f, c)]; }
  const cplx& at(std::size_t t, std::size_t f, std::size_t c) const { return data[index(t, f, c)]; }

  bool same_shape(const SpectralGrid& o) const {
    return frames == o.frames && bins == o.bins && channels == o.channels;
  }
};

inline std::vector<double> hann_window(std::size_t size) {
  if (size < 2) throw InvalidArgument("hann window size must be >= 2");
  std::vector<double> w(size);
  const double n = static_cast<double>(size);
  for (std::size_t i = 0; i < size; ++i)
    w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / n));
  return w;
}

inline std::vector<double> make_window(const StftConfig& cfg) {
  switch (cfg.window) {
    case WindowKind::hann:
      return hann_window(cfg.fft_size);
  }
  return {};
}

/// In-place iterative radix-2 FFT, unnormalised. `inverse` flips the exponent sign.
inline void fft(std::span<cplx> a, bool inverse = false) {
  const std::size_t n = a.size();
  if (n < 2) return;
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(k) /
                         static_cast<double>(len);
      const cplx w(std::cos(ang), std::sin(ang));
      for (std::size_t i = 0; i < n; i += len) {
        const cplx u = a[i + k];
        const cplx v = a[i + k + half] * w;
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

namespace detail {

// Non-negative bins of the DFT of a real frame.
inline void rfft(std::span<const double> frame, std::span<cplx> out, std::vector<cplx>& scratch) {
  scratch.assign(frame.begin(), frame.end());
  fft(scratch);
  for (std::size_t f = 0; f < out.size(); ++f) out[f] = scratch[f];
}

// Real inverse of a half spectrum. Imaginary parts of DC and Nyquist are ignored.
inline void irfft(std::span<const cplx> half, std::span<double> frame, std::vector<cplx>& scratch) {
  const std::size_t n = frame.size();
  scratch.assign(n, cplx{});
  scratch[0] = half[0].real();
  scratch[n / 2] = half[n / 2].real();
  for (std::size_t f = 1; f < n / 2; ++f) {
    scratch[f] = half[f];
    scratch[n - f] = std::conj(half[f]);
  }
  fft(scratch, true);
  for (std::size_t k = 0; k < n; ++k) frame[k] = scratch[k].real() / static_cast<double>(n);
}

inline std::size_t padded_length(const StftConfig& cfg, std::size_t frames) {
  return (frames - 1) * cfg.hop + cfg.fft_size;
}

// Sum of squared windows at every padded position.
inline std::vector<double> window_square_sum(const StftConfig& cfg, std::size_t frames,
                                             std::span<const double> window) {
  std::vector<double> wsq(padded_length(cfg, frames), 0.0);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t k = 0; k < cfg.fft_size; ++k) wsq[t * cfg.hop + k] += window[k] * window[k];
  return wsq;
}

inline void stft_channel(std::span<const double> signal, SpectralGrid& grid, std::size_t channel,
                         std::span<const double> window) {
  const StftConfig& cfg = grid.config;
  const std::size_t n = cfg.fft_size, pad = cfg.head_pad();
  std::vector<double> frame(n);
  std::vector<cplx> bins(grid.bins), scratch;
  for (std::size_t t = 0; t < grid.frames; ++t) {
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t p = t * cfg.hop + k;  // padded index
      const double x = (p >= pad && p - pad < signal.size()) ? signal[p - pad] : 0.0;
      frame[k] = window[k] * x;
    }
    rfft(frame, bins, scratch);
    for (std::size_t f = 0; f < grid.bins; ++f) grid.at(t, f, channel) = bins[f];
  }
}

}  // namespace detail

/// Single-channel STFT. Frame t covers padded samples [t*hop, t*hop + fft_size)
/// where the signal is preceded by fft_size/2 zeros and zero-filled at the tail.
inline SpectralGrid stft(std::span<const double> signal, const StftConfig& config) {
  config.validate();
  if (signal.empty()) throw InvalidArgument("stft of an empty signal");
  SpectralGrid grid(config.frames_for(signal.size()), config.bins(), 1, config, signal.size());
  const auto window = make_window(config);
  detail::stft_channel(signal, grid, 0, window);
  return grid;
}

/// Per-channel STFT of a latent sequence; channels stacked along C.
inline SpectralGrid stft_multi(const LatentSequence& latent, const StftConfig& config) {
  config.validate();
  const std::size_t len = latent.length(), ch = latent.dim();
  if (len == 0 || ch == 0) throw InvalidArgument("stft of an empty latent sequence");
  SpectralGrid grid(config.frames_for(len), config.bins(), ch, config, len);
  const auto window = make_window(config);
  std::vector<double> column(len);
  for (std::size_t c = 0; c < ch; ++c) {
    for (std::size_t t = 0; t < len; ++t) column[t] = latent.frames(t, c);
    detail::stft_channel(column, grid, c, window);
  }
  return grid;
}

/// Inverse of one channel: overlap-add of re-windowed frames divided by the
/// window-square sum, truncated to the original length.
inline std::vector<double> istft_channel(const SpectralGrid& grid, std::size_t channel) {
  const StftConfig& cfg = grid.config;
  cfg.validate();
  if (grid.frames == 0) throw InvalidArgument("istft of an empty grid");
  if (grid.bins != cfg.bins()) throw InvalidArgument("grid bin count does not match fft_size");
  const std::size_t n = cfg.fft_size, pad = cfg.head_pad();
  const auto window = make_window(cfg);
  const auto wsq = detail::window_square_sum(cfg, grid.frames, window);
  // samples no frame reaches count as a zero window-square sum
  for (std::size_t i = 0; i < grid.original_length; ++i)
    if (pad + i >= wsq.size() || wsq[pad + i] < 1e-12)
      throw NumericConfigError("window-square sum vanishes at sample " + std::to_string(i) +
                               " (hop " + std::to_string(cfg.hop) + ", fft_size " +
                               std::to_string(n) + ")");

  std::vector<double> buf(wsq.size(), 0.0), frame(n);
  std::vector<cplx> half(grid.bins), scratch;
  for (std::size_t t = 0; t < grid.frames; ++t) {
    for (std::size_t f = 0; f < grid.bins; ++f) half[f] = grid.at(t, f, channel);
    detail::irfft(half, frame, scratch);
    for (std::size_t k = 0; k < n; ++k) buf[t * cfg.hop + k] += window[k] * frame[k];
  }
  std::vector<double> out(grid.original_length);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = buf[pad + i] / wsq[pad + i];
  return out;
}

inline std::vector<double> istft(const SpectralGrid& grid) {
  if (grid.channels != 1) throw InvalidArgument("istft expects a single-channel grid");
  return istft_channel(grid, 0);
}

// ---------------------------------------------------------------------------
// Adjoints. Gradients with respect to a complex entry z are carried as the
// complex number dL/dRe(z) + i dL/dIm(z).

/// Adjoint of stft_multi: spectral gradient -> gradient on the latent frames.
inline Matrix stft_multi_backward(const SpectralGrid& grad) {
  const StftConfig& cfg = grad.config;
  const std::size_t n = cfg.fft_size, pad = cfg.head_pad(), len = grad.original_length;
  const auto window = make_window(cfg);
  Matrix out(len, grad.channels);
  std::vector<cplx> scratch(n);
  for (std::size_t c = 0; c < grad.channels; ++c) {
    for (std::size_t t = 0; t < grad.frames; ++t) {
      // d frame[k] = w[k] * Re(sum_f G_f e^{+2 pi i f k / n})
      std::fill(scratch.begin(), scratch.end(), cplx{});
      for (std::size_t f = 0; f < grad.bins; ++f) scratch[f] = grad.at(t, f, c);
      fft(scratch, true);
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t p = t * cfg.hop + k;
        if (p < pad || p - pad >= len) continue;
        out(p - pad, c) += window[k] * scratch[k].real();
      }
    }
  }
  return out;
}

/// Adjoint of istft per channel: gradient on latent frames -> spectral gradient
/// shaped like `like`.
inline SpectralGrid istft_multi_backward(const Matrix& grad, const SpectralGrid& like) {
  const StftConfig& cfg = like.config;
  const std::size_t n = cfg.fft_size, pad = cfg.head_pad();
  const auto window = make_window(cfg);
  const auto wsq = detail::window_square_sum(cfg, like.frames, window);
  SpectralGrid out(like.frames, like.bins, like.channels, cfg, like.original_length);
  std::vector<double> gbuf(wsq.size()), frame(n);
  std::vector<cplx> bins(like.bins), scratch;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t c = 0; c < like.channels; ++c) {
    std::fill(gbuf.begin(), gbuf.end(), 0.0);
    for (std::size_t i = 0; i < like.original_length; ++i) gbuf[pad + i] = grad(i, c) / wsq[pad + i];
    for (std::size_t t = 0; t < like.frames; ++t) {
      for (std::size_t k = 0; k < n; ++k) frame[k] = window[k] * gbuf[t * cfg.hop + k];
      detail::rfft(frame, bins, scratch);
      for (std::size_t f = 0; f < like.bins; ++f) {
        const bool edge = f == 0 || f == n / 2;
        const double scale = (edge ? 1.0 : 2.0) * inv_n;
        out.at(t, f, c) = edge ? cplx(scale * bins[f].real(), 0.0) : scale * bins[f];
      }
    }
  }
  return out;
}

}  // namespace ssmstyler
