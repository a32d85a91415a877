#pragma once

#include <stdexcept>
#include <string>

namespace mrasnn {

// Error taxonomy used across the engine. The CLI maps these onto distinct
// exit codes so scripted sweeps can tell failure classes apart.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor dimension / broadcast mismatches. Messages name the offending axis.
struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Invalid argument values (non-positive surrogate width, bad preset name, ...).
struct ValueError : Error {
    explicit ValueError(const std::string& msg) : Error(msg) {}
};

// Config-file problems: unknown keys, unparseable values.
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Dataset / checkpoint file problems: bad magic, version mismatch, truncation.
struct DataError : Error {
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// Numeric failures: NaN gradients, divergence.
struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

}  // namespace mrasnn
