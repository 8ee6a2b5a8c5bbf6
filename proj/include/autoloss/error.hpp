#pragma once

#include <stdexcept>
#include <string>

namespace autoloss {

// Base for everything the library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad run configuration, incompatible dimensions declared up front, unknown
// kinds, schedule violations. CLI exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed input data: missing fields, NaN values, unparseable CSV rows,
// empty splits. CLI exit code 3.
struct DataError : Error {
    using Error::Error;
};

// Shape mismatch detected at op boundaries. Message carries both shapes.
struct DimError : ConfigError {
    using ConfigError::ConfigError;
};

// Non-finite losses or gradients, divergence during training. CLI exit code 4.
struct NumericError : Error {
    using Error::Error;
};

}  // namespace autoloss
