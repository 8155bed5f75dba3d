// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace fabricsim {

// All recoverable failures carry a short stable code (asserted by tests and
// surfaced through the C API) plus a human-readable message.
class SimError : public std::runtime_error {
 public:
  SimError(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

[[noreturn]] inline void raise(const char* code, const std::string& message) {
  throw SimError(code, message);
}

}  // namespace fabricsim
