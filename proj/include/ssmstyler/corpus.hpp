#pragma once

// Synthetic style corpus. Each utterance is four equal segments, one
// pseudo-phoneme per segment; a segment is a fundamental plus its octave at the
// phoneme's base frequency, bent by the style's pitch/amplitude transform.

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dsp.hpp"
#include "error.hpp"
#include "params.hpp"
#include "speech.hpp"

namespace ssmstyler {

enum class Style { excited = 0, mysterious = 1, soothing = 2, angry = 3 };

inline constexpr std::array<std::string_view, 4> kStyleWords = {"excited", "mysterious", "soothing",
                                                                "angry"};
inline constexpr std::array<double, 3> kPhonemeHz = {220.0, 330.0, 440.0};

struct StyleTransform {
  double pitch;
  double amplitude;
};

inline StyleTransform style_transform(Style s) {
  switch (s) {
    case Style::excited: return {1.5, 1.2};
    case Style::soothing: return {0.75, 0.7};
    case Style::mysterious:
    case Style::angry: return {1.0, 1.0};
  }
  return {1.0, 1.0};
}

struct ToyCorpusConfig {
  int sample_rate_hz = 8000;
  std::size_t samples = 4000;  // 0.5 s
  std::size_t segments = 4;
  double noise = 0.005;
  ConvSpec encoder = ConvSpec::default_encoder();
};

struct ToyExample {
  Waveform waveform;
  std::string prompt;
  std::vector<int> frame_labels;
  std::vector<int> segment_labels;
  int style_id = 0;
};

/// Noise-free rendering of a label sequence in a style (phases fixed at zero).
inline std::vector<double> render_toy_signal(std::span<const int> segment_labels, Style style,
                                             std::size_t samples, int sample_rate_hz,
                                             std::span<const double> phases = {}) {
  const StyleTransform tf = style_transform(style);
  const double sr = static_cast<double>(sample_rate_hz), two_pi = 2.0 * std::numbers::pi;
  const std::size_t nseg = segment_labels.size();
  std::vector<double> out(samples);
  for (std::size_t n = 0; n < samples; ++n) {
    const std::size_t seg = std::min(nseg - 1, n * nseg / samples);
    const double f = kPhonemeHz[static_cast<std::size_t>(segment_labels[seg])] * tf.pitch;
    const double t = static_cast<double>(n) / sr;
    const double p0 = phases.empty() ? 0.0 : phases[2 * seg];
    const double p1 = phases.empty() ? 0.0 : phases[2 * seg + 1];
    double v = 0.4 * std::sin(two_pi * f * t + p0) + 0.2 * std::sin(two_pi * 2.0 * f * t + p1);
    if (style == Style::angry)
      v += 0.4 / 3.0 * std::sin(two_pi * 3.0 * f * t + p0) + 0.4 / 5.0 * std::sin(two_pi * 5.0 * f * t + p0);
    if (style == Style::mysterious) v *= 0.6 + 0.4 * std::sin(two_pi * 3.0 * t);
    out[n] = tf.amplitude * v;
  }
  return out;
}

/// Label of each encoder frame: the segment under the centre of its receptive field.
inline std::vector<int> frame_labels_for(std::span<const int> segment_labels, std::size_t samples,
                                         const ConvSpec& encoder) {
  const std::size_t frames = encoder.output_length(samples);
  const std::size_t stride = encoder.stride_samples(), centre = (encoder.min_input_length() - 1) / 2;
  std::vector<int> labels(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t n = std::min(samples - 1, t * stride + centre);
    labels[t] = segment_labels[n * segment_labels.size() / samples];
  }
  return labels;
}

inline std::string make_prompt(Style s, Rng& rng) {
  static constexpr std::array<std::string_view, 5> pre = {"", "very", "quite", "a", "slightly"};
  static constexpr std::array<std::string_view, 5> post = {"", "voice", "tone", "speech", "mood"};
  std::string out(pre[rng.below(pre.size())]);
  if (!out.empty()) out += ' ';
  out += kStyleWords[static_cast<std::size_t>(s)];
  const std::string_view tail = post[rng.below(post.size())];
  if (!tail.empty()) (out += ' ') += tail;
  return out;
}

/// Replace the style word in a corpus prompt with another style's word.
inline std::string restyle_prompt(const std::string& prompt, int style_id) {
  std::istringstream in(prompt);
  std::string word, out;
  bool replaced = false;
  while (in >> word) {
    bool is_style = false;
    for (auto w : kStyleWords) is_style |= (word == w);
    if (is_style && !replaced) {
      word = kStyleWords.at(static_cast<std::size_t>(style_id));
      replaced = true;
    }
    if (!out.empty()) out += ' ';
    out += word;
  }
  if (!replaced) throw InvalidArgument("prompt '" + prompt + "' has no style word");
  return out;
}

/// n_per_style examples of each style, interleaved by style; deterministic in seed.
inline std::vector<ToyExample> generate_toy_corpus(std::uint64_t seed, std::size_t n_per_style,
                                                   const ToyCorpusConfig& cfg = {}) {
  if (n_per_style == 0) throw InvalidArgument("n_per_style must be >= 1");
  Rng rng(seed ^ 0x5eed5eedULL);
  std::vector<ToyExample> corpus;
  corpus.reserve(4 * n_per_style);
  for (std::size_t i = 0; i < n_per_style; ++i) {
    for (int s = 0; s < 4; ++s) {
      ToyExample ex;
      ex.style_id = s;
      ex.segment_labels.resize(cfg.segments);
      for (int& l : ex.segment_labels) l = static_cast<int>(rng.below(kPhonemeHz.size()));
      std::vector<double> phases(2 * cfg.segments);
      for (double& p : phases) p = rng.uniform(0.0, 2.0 * std::numbers::pi);
      ex.waveform.sample_rate_hz = cfg.sample_rate_hz;
      ex.waveform.samples = render_toy_signal(ex.segment_labels, static_cast<Style>(s), cfg.samples,
                                              cfg.sample_rate_hz, phases);
      for (double& v : ex.waveform.samples) v = std::clamp(v + cfg.noise * rng.normal(), -1.0, 1.0);
      ex.prompt = make_prompt(static_cast<Style>(s), rng);
      ex.frame_labels = frame_labels_for(ex.segment_labels, cfg.samples, cfg.encoder);
      corpus.push_back(std::move(ex));
    }
  }
  return corpus;
}

}  // namespace ssmstyler
