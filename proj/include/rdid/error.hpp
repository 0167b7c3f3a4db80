#pragma once

#include <stdexcept>
#include <string>

namespace rdid {

// Every failure surfaced by the library carries one of these codes. The
// category groups them for the command-line exit status.
enum class ErrorCode {
  Usage,
  MissingColumn,
  NonBinary,
  NonNumeric,
  MissingValue,
  EmptyAfterFilter,
  DegenerateCell,
  InsufficientLevels,
  IrlsDiverged,
  PropensityDegenerate,
  SingularDesign,
  TooManyFailures,
  NoPrePeriods,
  NoNeverTreated,
  NoTreatedCohort,
  InvalidArgument,
  Io,
};

enum class ErrorCategory { Usage, Data, Estimation, Io };

inline ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::Usage:
    case ErrorCode::InvalidArgument:
      return ErrorCategory::Usage;
    case ErrorCode::MissingColumn:
    case ErrorCode::NonBinary:
    case ErrorCode::NonNumeric:
    case ErrorCode::MissingValue:
    case ErrorCode::EmptyAfterFilter:
    case ErrorCode::NoPrePeriods:
    case ErrorCode::NoNeverTreated:
    case ErrorCode::NoTreatedCohort:
      return ErrorCategory::Data;
    case ErrorCode::DegenerateCell:
    case ErrorCode::InsufficientLevels:
    case ErrorCode::IrlsDiverged:
    case ErrorCode::PropensityDegenerate:
    case ErrorCode::SingularDesign:
    case ErrorCode::TooManyFailures:
      return ErrorCategory::Estimation;
    case ErrorCode::Io:
      return ErrorCategory::Io;
  }
  return ErrorCategory::Estimation;
}

inline const char* code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Usage: return "Usage";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonBinary: return "NonBinary";
    case ErrorCode::NonNumeric: return "NonNumeric";
    case ErrorCode::MissingValue: return "MissingValue";
    case ErrorCode::EmptyAfterFilter: return "EmptyAfterFilter";
    case ErrorCode::DegenerateCell: return "DegenerateCell";
    case ErrorCode::InsufficientLevels: return "InsufficientLevels";
    case ErrorCode::IrlsDiverged: return "IrlsDiverged";
    case ErrorCode::PropensityDegenerate: return "PropensityDegenerate";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::TooManyFailures: return "TooManyFailures";
    case ErrorCode::NoPrePeriods: return "NoPrePeriods";
    case ErrorCode::NoNeverTreated: return "NoNeverTreated";
    case ErrorCode::NoTreatedCohort: return "NoTreatedCohort";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(code_name(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace rdid
