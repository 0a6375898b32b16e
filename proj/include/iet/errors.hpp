#pragma once

#include <stdexcept>
#include <string>

namespace iet {

/// Raised when an argument violates a documented precondition
/// (reducible permutation, nonpositive length, malformed word, ...).
class validation_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when the dynamics hits the measure-zero exceptional set
/// (a tie between the two competing subintervals).
class boundary_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace iet
