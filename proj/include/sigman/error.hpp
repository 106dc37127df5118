#pragma once

#include <stdexcept>
#include <string>

namespace sigman {

/// Raised when an input violates a documented precondition or invariant.
class ParameterError : public std::invalid_argument {
public:
    explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when a requested fit or sweep cannot meet its quality gate.
class FitQualityError : public std::runtime_error {
public:
    explicit FitQualityError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sigman
