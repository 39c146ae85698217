#pragma once

// RIFF/WAVE, PCM 16-bit signed little-endian, mono. Samples map to [-1, 1) by
// division by 32768.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <string>
#include <vector>

#include "dsp.hpp"
#include "error.hpp"

namespace ssmstyler {

namespace detail {

inline std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}
inline std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}
inline void put32(std::ostream& o, std::uint32_t v) {
  const char b[4] = {char(v & 0xff), char(v >> 8 & 0xff), char(v >> 16 & 0xff), char(v >> 24)};
  o.write(b, 4);
}
inline void put16(std::ostream& o, std::uint16_t v) {
  const char b[2] = {char(v & 0xff), char(v >> 8)};
  o.write(b, 2);
}

}  // namespace detail

inline Waveform read_wav(std::istream& in) {
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::string(bytes.begin(), bytes.begin() + 4) != "RIFF" ||
      std::string(bytes.begin() + 8, bytes.begin() + 12) != "WAVE")
    throw FormatError("not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id(bytes.begin() + pos, bytes.begin() + pos + 4);
    const std::size_t size = detail::le32(&bytes[pos + 4]);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      // Some writers leave a bogus data size; accept a truncated final data chunk.
      if (id != "data") throw FormatError("truncated '" + id + "' chunk");
    }
    if (id == "fmt ") {
      if (size < 16) throw FormatError("fmt chunk too short");
      format = detail::le16(&bytes[body]);
      channels = detail::le16(&bytes[body + 2]);
      rate = detail::le32(&bytes[body + 4]);
      bits = detail::le16(&bytes[body + 14]);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError("data chunk before fmt chunk");
      if (format != 1) throw FormatError("only PCM (format 1) is supported");
      if (channels != 1)
        throw FormatError("expected mono audio, got " + std::to_string(channels) + " channels");
      if (bits != 16) throw FormatError("expected 16-bit samples, got " + std::to_string(bits));
      if (rate == 0) throw FormatError("sample rate is zero");
      const std::size_t avail = std::min(size, bytes.size() - body);
      Waveform w;
      w.sample_rate_hz = static_cast<int>(rate);
      w.samples.resize(avail / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const auto s = static_cast<std::int16_t>(detail::le16(&bytes[body + 2 * i]));
        w.samples[i] = static_cast<double>(s) / 32768.0;
      }
      return w;
    }
    pos = body + size + (size & 1);
  }
  throw FormatError("no data chunk");
}

inline void write_wav(const Waveform& w, std::ostream& out) {
  const auto n = static_cast<std::uint32_t>(w.samples.size());
  out.write("RIFF", 4);
  detail::put32(out, 36 + 2 * n);
  out.write("WAVEfmt ", 8);
  detail::put32(out, 16);
  detail::put16(out, 1);
  detail::put16(out, 1);
  detail::put32(out, static_cast<std::uint32_t>(w.sample_rate_hz));
  detail::put32(out, static_cast<std::uint32_t>(w.sample_rate_hz) * 2);
  detail::put16(out, 2);
  detail::put16(out, 16);
  out.write("data", 4);
  detail::put32(out, 2 * n);
  for (double s : w.samples) {
    const double q = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    detail::put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
}

inline Waveform read_wav_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_wav(in);
}

inline void write_wav_file(const Waveform& w, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_wav(w, out);
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace ssmstyler
