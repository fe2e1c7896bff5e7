#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace patchleak {

// Base of every error this library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define PATCHLEAK_ERROR(Name)          \
  class Name : public Error {          \
   public:                             \
    using Error::Error;                \
  }

PATCHLEAK_ERROR(ParseError);
PATCHLEAK_ERROR(IoError);

// corpus
PATCHLEAK_ERROR(DanglingLabel);
PATCHLEAK_ERROR(TimelineViolation);
PATCHLEAK_ERROR(DayOutOfRange);
PATCHLEAK_ERROR(InvariantViolation);

// linkattack
PATCHLEAK_ERROR(MissingBugEvents);

// features
PATCHLEAK_ERROR(EmptyTrainingSet);
PATCHLEAK_ERROR(EmptyInput);
PATCHLEAK_ERROR(ZeroSplitInformation);
PATCHLEAK_ERROR(DegenerateFeature);

// learner
PATCHLEAK_ERROR(DimensionMismatch);
PATCHLEAK_ERROR(SingleClassTrainingSet);
PATCHLEAK_ERROR(InsufficientData);
PATCHLEAK_ERROR(SingleClassFold);
PATCHLEAK_ERROR(UncalibratedModel);

// randmodel
PATCHLEAK_ERROR(InvalidSupport);
PATCHLEAK_ERROR(NegativePool);

// simulator / synthgen
PATCHLEAK_ERROR(EmptyWindow);
PATCHLEAK_ERROR(InvalidConfig);

#undef PATCHLEAK_ERROR

// A JSONL/JSON record failed validation. Carries file, line and field.
class MalformedRecord : public Error {
 public:
  MalformedRecord(std::string file, std::size_t line, std::string field, const std::string& reason);

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::string file_;
  std::size_t line_;
  std::string field_;
};

}  // namespace patchleak
