/*
   Copyright 2026 The drnet Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace drnet {

enum class ErrorCode {
  shape_mismatch,
  invalid_argument,
  non_finite,
  io,
  unsupported_format,
  config,
  manifest,
  checkpoint_corrupt,
  checkpoint_truncated,
  checkpoint_version,
  checkpoint_shape,
  checkpoint_missing,
  diverged,
  gradient_check,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library. The code is stable and machine-readable;
/// the message names the offending dimension, parameter, file or key.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace drnet
