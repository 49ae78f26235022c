// Copyright 2026 The kerrcubic Authors
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
#include <utility>
#include <vector>

namespace kerrcubic {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: malformed configuration, violated precondition, dimension mismatch.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A numerical contract could not be met (truncation, integration, convergence).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Non-fatal findings collected while running an operation.
struct Diagnostics {
  std::vector<std::string> warnings;

  void warn(std::string message) { warnings.push_back(std::move(message)); }
  bool clean() const { return warnings.empty(); }
  void merge(const Diagnostics& other) {
    warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
  }
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace kerrcubic
