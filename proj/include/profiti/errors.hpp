// Copyright 2026 The ProFITi Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>

namespace profiti {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform for the requested op.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Input outside the mathematical domain of an op (log of a non-positive value, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, failed convergence, exploding training. CLI exit code 3.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid user configuration. CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Invalid data: violated IMTS invariants, malformed files.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed JSONL line; carries the 1-based line number.
class SchemaError : public DataError {
 public:
  SchemaError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  explicit SchemaError(const std::string& what) : DataError(what) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_ = 0;
};

// Warnings go through a replaceable sink so tests and the CLI can capture them.
using WarningSink = std::function<void(const std::string&)>;

inline WarningSink& warning_sink() {
  static WarningSink sink = [](const std::string& msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return sink;
}

inline void warn(const std::string& msg) {
  if (warning_sink()) warning_sink()(msg);
}

}  // namespace profiti
