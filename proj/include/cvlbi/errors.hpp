#pragma once

#include <stdexcept>
#include <string>

namespace cvlbi {

/// Rejected input: a parameter or argument outside its domain.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A computation that cannot proceed on valid-looking input
/// (singular matrix, failed factorization, optimizer divergence).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace cvlbi
