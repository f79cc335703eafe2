#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pem {

enum class ErrorCode {
  ConfigError,
  CrewViolation,
  CacheOverflow,
  BlockOverflow,
  NoSuchBlock,
  NotNormalized,
  NotResident,
  KindError,
  NoSharedVertex,
  NotAPermutation,
  BadLabeling,
  NotAPath,
  DependentSet,
  GuardTripped,
  CorruptRecord,
  IncompleteEvaluation,
  NotSpecialClass,
  TooLarge,
  InsufficientData,
  ParseError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the simulator carries one of the codes above so
// callers (and the fuzz suite) can tell the designated error apart.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pem
