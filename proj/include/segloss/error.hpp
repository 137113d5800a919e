/* Copyright 2026 The segloss Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef SEGLOSS_ERROR_HPP_
#define SEGLOSS_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace segloss {

enum class ErrorKind {
  kInvalidInput,
  kDegenerateInput,
  kTrainingDegenerate,
  kParse,
};

// All library failures surface as this exception type; kind() tells callers
// (the CLI in particular) how to map them to exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_invalid(const std::string& what) {
  throw Error(ErrorKind::kInvalidInput, what);
}

inline void require(bool condition, const std::string& what) {
  if (!condition) throw_invalid(what);
}

}  // namespace segloss

#endif  // SEGLOSS_ERROR_HPP_
