#pragma once

#include <stdexcept>
#include <string>

namespace ksddpg {

/// Shape disagreement between operands. Message names both shapes.
class DimensionError : public std::runtime_error {
public:
    explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

/// API misuse: stale cache, call outside a decision point, empty batch, ...
class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite values where finite ones are required.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid configuration value (out-of-range tau, bad rates, missing file, ...).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Input file does not parse against its schema.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Parsed input is structurally valid but self-inconsistent.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// File format magic/version mismatch.
class VersionError : public std::runtime_error {
public:
    explicit VersionError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace ksddpg
