// Copyright 2026 The lpskit Authors.
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

#ifndef LPS_ERROR_HPP_
#define LPS_ERROR_HPP_

#include <map>
#include <stdexcept>
#include <string>
#include <utility>

namespace lps {

enum class ErrorKind {
  kShape,       // operand extents disagree
  kRange,       // value outside the representable or allowed range
  kFormat,      // malformed byte stream
  kValidation,  // bad configuration or argument
  kData,        // unreadable or inconsistent input data
  kInfeasible,  // search found no admissible candidate
  kNumeric,     // non-finite value encountered
};

const char* to_string(ErrorKind kind);

// Structured error. `details` carries machine-readable context (shapes, byte
// offsets, key paths, ids) that the CLI forwards verbatim as JSON.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        std::map<std::string, std::string> details = {})
      : std::runtime_error(message), kind_(kind), details_(std::move(details)) {}

  ErrorKind kind() const { return kind_; }
  const std::map<std::string, std::string>& details() const { return details_; }

 private:
  ErrorKind kind_;
  std::map<std::string, std::string> details_;
};

}  // namespace lps

#endif  // LPS_ERROR_HPP_
