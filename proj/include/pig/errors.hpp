// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace pig {

// Base for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape disagreement; message carries both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Bad model/run configuration (unknown key, invalid value, d % heads != 0, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// API misuse (k out of range, backward on non-scalar, empty batch, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Dataset/ground-truth problems (missing ground truth, duplicate ids, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// Numerical faults that must not propagate silently (NaN/Inf, zero norm).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Persisted file problems (bad magic, unsupported version, truncation).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace pig
