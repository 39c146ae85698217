#pragma once

// Text checkpoint format:
//
//   ssmstyler-ckpt v1
//   <name> <ndim> <d0> <d1> ...
//   <row-major values, %.17g, space separated>
//   ...
//
// Parameters appear in ParamStore order (sorted by name), so save -> load -> save
// is byte-identical.

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "error.hpp"
#include "params.hpp"

namespace ssmstyler {

inline constexpr const char* kCheckpointHeader = "ssmstyler-ckpt v1";

inline void save_checkpoint(const ParamStore& params, std::ostream& out) {
  out << kCheckpointHeader << '\n';
  char buf[40];
  for (const auto& [name, p] : params) {
    out << name << ' ' << p.shape.size();
    for (std::size_t d : p.shape) out << ' ' << d;
    out << '\n';
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", p.value[i]);
      if (i) out << ' ';
      out << buf;
    }
    out << '\n';
  }
}

inline ParamStore load_checkpoint(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw CorruptCheckpoint("empty checkpoint");
  if (header != kCheckpointHeader) {
    if (header.rfind("ssmstyler-ckpt ", 0) == 0)
      throw CorruptCheckpoint("unsupported checkpoint version '" + header.substr(15) + "'");
    throw CorruptCheckpoint("not a checkpoint (bad header)");
  }
  ParamStore params;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream meta(line);
    std::string name;
    std::size_t ndim = 0;
    if (!(meta >> name >> ndim)) throw CorruptCheckpoint("bad parameter header: " + line);
    std::vector<std::size_t> shape(ndim);
    for (auto& d : shape)
      if (!(meta >> d)) throw CorruptCheckpoint("bad shape for '" + name + "'");
    Param& p = params.add(name, shape);

    std::string values;
    if (!std::getline(in, values)) throw CorruptCheckpoint("missing values for '" + name + "'");
    const char* cur = values.c_str();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(cur, &end);
      if (end == cur) throw CorruptCheckpoint("'" + name + "' holds fewer values than its shape");
      // ERANGE also flags subnormals, which are fine; only overflow is corrupt
      if (errno == ERANGE && std::isinf(v))
        throw CorruptCheckpoint("'" + name + "' holds an out-of-range value");
      p.value[i] = v;
      cur = end;
    }
    while (*cur == ' ' || *cur == '\t' || *cur == '\r') ++cur;
    if (*cur != '\0') throw CorruptCheckpoint("'" + name + "' holds more values than its shape");
  }
  return params;
}

inline void save_checkpoint_file(const ParamStore& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  save_checkpoint(params, out);
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline ParamStore load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return load_checkpoint(in);
}

}  // namespace ssmstyler
