#include "flip/errors.hpp"

#include <sstream>

namespace flip {

namespace {

std::string position_message(const std::string& message, std::size_t line, std::size_t column) {
  std::ostringstream os;
  os << message << " (line " << line << ", column " << column << ")";
  return os.str();
}

std::string delay_message(double worst, double bound) {
  std::ostringstream os;
  os << "worst leaf-to-destination delay " << worst << " ms exceeds bound " << bound << " ms";
  return os.str();
}

}  // namespace

SyntaxError::SyntaxError(const std::string& message, std::size_t line, std::size_t column)
    : Error("SyntaxError", position_message(message, line, column)), line_(line), column_(column) {}

RejectedByDelay::RejectedByDelay(double worst_path_delay_ms, double bound_ms)
    : Error("RejectedByDelay", delay_message(worst_path_delay_ms, bound_ms)),
      worst_(worst_path_delay_ms),
      bound_(bound_ms) {}

}  // namespace flip
