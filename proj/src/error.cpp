#include "rtp/error.hpp"

namespace rtp {

std::string_view error_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NegativeRate: return "NegativeRate";
    case ErrorKind::EmptyFamily: return "EmptyFamily";
    case ErrorKind::ArityOverflow: return "ArityOverflow";
    case ErrorKind::StepTooLarge: return "StepTooLarge";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::EnumerationCap: return "EnumerationCap";
    case ErrorKind::Unsupported: return "Unsupported";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace rtp
