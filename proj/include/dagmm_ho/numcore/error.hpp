#pragma once

#include <stdexcept>
#include <string>

namespace dagmm_ho {

// Every library failure derives from Error so callers can catch one type.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error { using Error::Error; };
struct NumericError : Error { using Error::Error; };
struct ParameterError : Error { using Error::Error; };
struct InputError : Error { using Error::Error; };
struct DegenerateInputError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct UnsupportedFormatError : FormatError { using FormatError::FormatError; };
struct VersionError : FormatError { using FormatError::FormatError; };
struct MetricError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

}  // namespace dagmm_ho
