#pragma once

#include <stdexcept>
#include <string>

namespace flowhunt {

/// Bad input data: unreadable files, malformed CSV, schema mismatches,
/// preconditions that depend on the data (e.g. fewer rows than clusters).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or parameter values.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace flowhunt
