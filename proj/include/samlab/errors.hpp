#pragma once

#include <stdexcept>
#include <string>

namespace samlab {

// Invalid configuration file or option set. CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed on-disk artifact (IDX file, checkpoint, CSV).
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad data contents (label out of range, empty corpus, ...).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure (singular system, non-finite loss). CLI maps this to exit code 3.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// API misuse (backward before forward, layout mismatch).
class StateError : public std::logic_error {
public:
    explicit StateError(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace samlab
