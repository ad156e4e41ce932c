#pragma once

#include <stdexcept>
#include <string>

namespace overlap_reg {

enum class ErrorCode {
  invalid_argument,
  empty_target,
  degenerate_correspondences,
  rank_deficient,
  reflection_detected,
  no_overlap_support,
  no_model_support,
  model_outside_overlap,
  empty_view,
  parse_error,
  io_error,
};

// Single exception type for the whole library. The code tells callers which
// contract was violated; the message carries the human-readable context
// (file, byte offset, iteration, ...).
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

}  // namespace overlap_reg
