#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rtp {

enum class ErrorKind {
  InvalidArgument,
  NegativeRate,
  EmptyFamily,
  ArityOverflow,
  StepTooLarge,
  NotConverged,
  BudgetExceeded,
  EnumerationCap,
  Unsupported,
  ConfigError,
};

std::string_view error_name(ErrorKind kind);

/// Every library failure carries a kind so that the CLI can report it by name.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(error_name(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace rtp
