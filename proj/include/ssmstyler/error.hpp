#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ssmstyler {

// Root of every error the library throws. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Parameter store or spec does not match the configured shapes.
class InvalidConfig : public Error {
 public:
  using Error::Error;
};

// STFT configuration that cannot be inverted (window-square sum vanishes).
class NumericConfigError : public Error {
 public:
  using Error::Error;
};

class CorruptCheckpoint : public Error {
 public:
  using Error::Error;
};

// L2 normalisation of an exactly-zero vector.
class DegenerateEmbedding : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A loss or gradient became NaN/inf. `step` is the training step, or npos.
class NonFiniteError : public Error {
 public:
  NonFiniteError(const std::string& what, std::size_t step = npos)
      : Error(what), step_(step) {}
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace ssmstyler
