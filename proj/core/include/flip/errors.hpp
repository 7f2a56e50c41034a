#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace flip {

/// Base of every error the library raises. `code()` is the machine-readable
/// name that the command protocol reports alongside the message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define FLIP_DEFINE_ERROR(Name)                                               \
  class Name : public Error {                                                 \
   public:                                                                    \
    explicit Name(const std::string& message) : Error(#Name, message) {}      \
  }

FLIP_DEFINE_ERROR(ParseError);
FLIP_DEFINE_ERROR(ValidationError);
FLIP_DEFINE_ERROR(NotFound);
FLIP_DEFINE_ERROR(UnknownOperation);
FLIP_DEFINE_ERROR(ArityError);
FLIP_DEFINE_ERROR(UnknownNode);
FLIP_DEFINE_ERROR(UnknownRegion);
FLIP_DEFINE_ERROR(EmptyRange);
FLIP_DEFINE_ERROR(PlacementError);
FLIP_DEFINE_ERROR(CompileError);
FLIP_DEFINE_ERROR(UnknownSwitch);
FLIP_DEFINE_ERROR(ShapeMismatch);
FLIP_DEFINE_ERROR(MissingSource);
FLIP_DEFINE_ERROR(UnknownVerb);
FLIP_DEFINE_ERROR(IoError);
FLIP_DEFINE_ERROR(AuditFailure);
FLIP_DEFINE_ERROR(Unsupported);

#undef FLIP_DEFINE_ERROR

/// Request text could not be tokenized or parsed. Positions are 1-based.
class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& message, std::size_t line, std::size_t column);
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// The worst leaf-to-destination delay of a plan exceeds the requested bound.
class RejectedByDelay : public Error {
 public:
  RejectedByDelay(double worst_path_delay_ms, double bound_ms);
  double worst_path_delay_ms() const noexcept { return worst_; }
  double bound_ms() const noexcept { return bound_; }

 private:
  double worst_;
  double bound_;
};

}  // namespace flip
