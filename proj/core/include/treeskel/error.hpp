// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace treeskel {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument to an operation (non-positive radius, k <= 0, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Input data does not satisfy an operation's preconditions.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents. `line()` is 1-based within the file.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError(what + " (line " + std::to_string(line) + ")"), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A fitting or clustering step could not produce a model.
class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace treeskel
