// Copyright 2026 The sdlr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace sdlr {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Argument outside the domain of the operation (negative rate, dt <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Matrix lacks the column rank needed for a retraction.
class RankError : public Error {
 public:
  using Error::Error;
};

// Non-finite values appeared during evaluation.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, long index = -1)
      : Error(what), index_(index) {}

  // Offending sample index, or -1 when not tied to a sample.
  long index() const noexcept { return index_; }

 private:
  long index_;
};

// A matrix that must be inverted became (numerically) singular.
class SingularityError : public Error {
 public:
  SingularityError(const std::string& what, double time)
      : Error(what + " (t = " + std::to_string(time) + ")"), time_(time) {}

  double time() const noexcept { return time_; }

 private:
  double time_;
};

// Requested capability is not available for this model.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// Invalid experiment configuration; the message names the field path.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : Error(field + ": " + message), field_(field) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace sdlr
