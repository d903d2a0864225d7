#pragma once

#include <stdexcept>
#include <string>

namespace blnn {

/// Malformed input text. The message names the file and line.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Well-formed input that violates a structural invariant.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not line up.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Invalid or inconsistent configuration.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A quantity is mathematically undefined for the given input.
struct UndefinedError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Non-finite values appeared during training.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace blnn
