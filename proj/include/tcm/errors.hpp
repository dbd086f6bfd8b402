#pragma once

#include <stdexcept>
#include <string>

namespace tcm {

// Base class for all library failures.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad user input: unknown activation id, malformed level selector, invalid
// lattice spec, out-of-range grid order.  CLI exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

// Iterative method failed to reach its tolerance (stationarity solve, alpha
// bracketing, quadrature order agreement).  CLI exit code 3.
struct ConvergenceError : Error {
    using Error::Error;
};

// Parameters left the admissible region (Theta <= 0, non-monotone overlaps,
// negative radicand beyond tolerance).  CLI exit code 4.
struct DomainError : Error {
    using Error::Error;
};

}  // namespace tcm
