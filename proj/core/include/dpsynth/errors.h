// Copyright 2026 The dpsynth Authors
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
#ifndef DPSYNTH_ERRORS_H_
#define DPSYNTH_ERRORS_H_

#include <stdexcept>
#include <string>

namespace dpsynth {

// Base of every exception thrown by the library. `kind()` is a stable
// identifier used in machine-readable error summaries.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

class InvalidArgumentError : public Error {
 public:
  explicit InvalidArgumentError(const std::string& message)
      : Error("invalid_argument", message) {}
};

// Malformed or out-of-domain input data.
class DataError : public Error {
 public:
  explicit DataError(const std::string& message)
      : Error("data_error", message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io_error", message) {}
};

// An object was used in a state that does not permit the operation.
class StateError : public Error {
 public:
  explicit StateError(const std::string& message)
      : Error("state_error", message) {}
};

}  // namespace dpsynth

#endif  // DPSYNTH_ERRORS_H_
