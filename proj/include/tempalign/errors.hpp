#pragma once

#include <stdexcept>
#include <string>

namespace tempalign {

/// Base of every error raised by the library. `exit_code()` is what the CLI
/// returns when the error escapes a subcommand.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 3; }
};

#define TEMPALIGN_DEFINE_ERROR(Name, Base) \
  class Name : public Base {               \
   public:                                 \
    using Base::Base;                      \
  };

// Malformed files and inconsistent data (exit 3).
TEMPALIGN_DEFINE_ERROR(FormatError, Error)
TEMPALIGN_DEFINE_ERROR(CorruptError, Error)
TEMPALIGN_DEFINE_ERROR(ValidationError, Error)
TEMPALIGN_DEFINE_ERROR(EmptySelectionError, Error)
TEMPALIGN_DEFINE_ERROR(ShapeError, Error)
TEMPALIGN_DEFINE_ERROR(DataError, Error)
TEMPALIGN_DEFINE_ERROR(DegenerateError, Error)
TEMPALIGN_DEFINE_ERROR(NonPositivePeakError, Error)
TEMPALIGN_DEFINE_ERROR(TooShortError, Error)
TEMPALIGN_DEFINE_ERROR(ParameterError, Error)

#undef TEMPALIGN_DEFINE_ERROR

/// Run configuration does not match the schema (exit 2).
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error("config field '" + field + "': " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }
  int exit_code() const noexcept override { return 2; }

 private:
  std::string field_;
};

/// A postcondition the library itself guarantees was violated (exit 4).
class InvariantError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

}  // namespace tempalign
