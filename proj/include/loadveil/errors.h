// Copyright 2026 The LoadVeil Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LOADVEIL_ERRORS_H_
#define LOADVEIL_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace loadveil {

// Caller supplied arguments that violate a documented precondition.
class InvalidArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operand shapes disagree (dictionary rows vs batch length, etc).
class DimensionMismatchError : public InvalidArgumentError {
 public:
  using InvalidArgumentError::InvalidArgumentError;
};

// File could not be opened, read, or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file content. `line()` is 1-based, 0 when unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error(line == 0 ? what
                                     : "line " + std::to_string(line) + ": " +
                                           what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// An iterative solver produced non-finite values.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A privacy budget that is infinite (e.g. f = 0, no randomization at all).
class UnboundedPrivacyError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace loadveil

#endif  // LOADVEIL_ERRORS_H_
