#pragma once

#include <stdexcept>
#include <string>

namespace quantforge {

// Base for all workbench errors that map to dedicated CLI exit codes.
// Argument misuse throws std::invalid_argument, non-finite numeric input
// throws std::range_error; both map to exit code 2.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Unrecognized or malformed file contents (bad magic, bad JSON). Exit 3.
class FormatError : public Error {
public:
    explicit FormatError(const std::string& msg) : Error(msg) {}
};

// Structural damage in an otherwise recognized file: truncation,
// overlapping or misaligned ranges, inconsistent sizes. Exit 3.
class CorruptionError : public FormatError {
public:
    explicit CorruptionError(const std::string& msg) : FormatError(msg) {}
};

// Recognized container, unsupported version. Exit 3.
class VersionError : public FormatError {
public:
    explicit VersionError(const std::string& msg) : FormatError(msg) {}
};

// A tensor type the requested operation cannot handle. Exit 4.
class UnsupportedTypeError : public Error {
public:
    explicit UnsupportedTypeError(const std::string& msg) : Error(msg) {}
};

// Model comparison impossible: name or shape mismatch. Exit 5.
class DiffMismatchError : public Error {
public:
    explicit DiffMismatchError(const std::string& msg) : Error(msg) {}
};

} // namespace quantforge
