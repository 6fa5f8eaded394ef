#pragma once

#include <stdexcept>
#include <string>

namespace trav {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad or inconsistent run configuration (CLI exit code 2).
struct ConfigError : Error {
    using Error::Error;
};

// Filesystem-level failure: missing file, unwritable path (CLI exit code 3).
struct IoError : Error {
    using Error::Error;
};

// Structurally invalid file contents: bad magic, truncation, non-finite
// payload (CLI exit code 3).
struct FormatError : Error {
    using Error::Error;
};

// Non-finite or degenerate numeric state (CLI exit code 4).
struct NumericError : Error {
    using Error::Error;
};

}  // namespace trav
