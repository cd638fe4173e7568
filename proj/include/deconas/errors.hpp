#pragma once

#include <stdexcept>
#include <string>

namespace deconas {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define DECONAS_DEFINE_ERROR(Name)            \
  class Name : public Error {                 \
   public:                                    \
    using Error::Error;                       \
  };

DECONAS_DEFINE_ERROR(LengthError)
DECONAS_DEFINE_ERROR(RangeError)
DECONAS_DEFINE_ERROR(ValidationError)
DECONAS_DEFINE_ERROR(SpaceTooLargeError)
DECONAS_DEFINE_ERROR(ShapeError)
DECONAS_DEFINE_ERROR(GradientError)
DECONAS_DEFINE_ERROR(BankError)
DECONAS_DEFINE_ERROR(DataError)
DECONAS_DEFINE_ERROR(FormatError)
DECONAS_DEFINE_ERROR(CheckpointError)

#undef DECONAS_DEFINE_ERROR

}  // namespace deconas
