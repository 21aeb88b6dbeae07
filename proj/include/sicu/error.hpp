#pragma once

#include <stdexcept>
#include <string>

namespace sicu {

/// Precondition violated by a caller-supplied value.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// API misuse, e.g. backward() without a matching forward().
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Inconsistent or incomplete configuration (missing bank entry, bad profile).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A required model/checkpoint is absent.
class MissingModel : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Base for malformed dataset / checkpoint files.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ChecksumError : public FormatError {
public:
    using FormatError::FormatError;
};

class VersionError : public FormatError {
public:
    using FormatError::FormatError;
};

class TruncatedError : public FormatError {
public:
    using FormatError::FormatError;
};

}  // namespace sicu
