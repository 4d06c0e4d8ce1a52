#pragma once

#include <stdexcept>
#include <string>

namespace mska {

// Error taxonomy shared by every module. The CLI maps these onto exit codes:
// ConfigError -> 2, InputError/ParseError/FilesystemError -> 3,
// NumericError/InfeasibleError -> 4.

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes or an axis outside the tensor rank.
struct DimensionError : Error {
    using Error::Error;
};

/// NaN/Inf encountered where a finite value is required.
struct NumericError : Error {
    using Error::Error;
};

/// A caller violated a documented precondition (e.g. non-scalar loss).
struct ContractError : Error {
    using Error::Error;
};

/// Invalid input data or argument values.
struct InputError : Error {
    using Error::Error;
};

struct ParseError : InputError {
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : InputError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// CTC target cannot be aligned to the available number of frames.
struct InfeasibleError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct FilesystemError : Error {
    using Error::Error;
};

}  // namespace mska
