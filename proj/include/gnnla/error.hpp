#pragma once

#include <stdexcept>
#include <string>

namespace gnnla {

/// Base error for invalid input (bad shapes, malformed files, violated preconditions).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A computation produced an undefined or non-finite result (zero pivot, NaN loss,
/// non-converged eigen iteration). The CLI maps this to exit code 1.
class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace gnnla
