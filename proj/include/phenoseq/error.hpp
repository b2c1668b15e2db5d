#pragma once

#include <stdexcept>
#include <string>

namespace phenoseq {

// Malformed or inconsistent input data (corpus lines, config files,
// shape mismatches between models and inputs).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values produced during optimization.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace phenoseq
