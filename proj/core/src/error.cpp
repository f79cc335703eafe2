#include "pem/error.hpp"

namespace pem {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::CrewViolation: return "CrewViolation";
    case ErrorCode::CacheOverflow: return "CacheOverflow";
    case ErrorCode::BlockOverflow: return "BlockOverflow";
    case ErrorCode::NoSuchBlock: return "NoSuchBlock";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::NotResident: return "NotResident";
    case ErrorCode::KindError: return "KindError";
    case ErrorCode::NoSharedVertex: return "NoSharedVertex";
    case ErrorCode::NotAPermutation: return "NotAPermutation";
    case ErrorCode::BadLabeling: return "BadLabeling";
    case ErrorCode::NotAPath: return "NotAPath";
    case ErrorCode::DependentSet: return "DependentSet";
    case ErrorCode::GuardTripped: return "GuardTripped";
    case ErrorCode::CorruptRecord: return "CorruptRecord";
    case ErrorCode::IncompleteEvaluation: return "IncompleteEvaluation";
    case ErrorCode::NotSpecialClass: return "NotSpecialClass";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace pem
