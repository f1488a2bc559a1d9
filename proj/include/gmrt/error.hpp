#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gmrt {

enum class ErrorCode {
  invalid_parameter,
  degenerate_distribution,
  degenerate_approximation,
  empty_sample,
  index_error,
  invalid_state,
  alignment_error,
  validation_error,
  config_error,
  initialization_failure,
  runtime_failure,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Library-wide exception carrying a machine-readable category.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gmrt
