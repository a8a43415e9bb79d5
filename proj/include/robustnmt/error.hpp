// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace robustnmt {

// Error taxonomy mirrors the CLI exit codes: ConfigError -> 1, DataError -> 2,
// NumericalError (and ShapeError) -> 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

struct NumericalError : Error {
  using Error::Error;
};

// Raised when tensor operands do not conform to an op's signature. The message
// always names the op and the offending shapes.
struct ShapeError : NumericalError {
  using NumericalError::NumericalError;
};

}  // namespace robustnmt
