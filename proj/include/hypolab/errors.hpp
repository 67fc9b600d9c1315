#pragma once

#include <stdexcept>
#include <string>

namespace hypolab {

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A scalar parameter is out of its admissible range (names the field).
struct ParameterError : Error {
    using Error::Error;
};

/// A weight/exponent combination violates an admissibility constraint.
struct AdmissibilityError : Error {
    using Error::Error;
};

/// The requested (space, p) or model combination is not implemented.
struct CapabilityError : Error {
    using Error::Error;
};

/// Grid or quadrature ladder too coarse for the requested accuracy.
struct ResolutionError : Error {
    using Error::Error;
};

/// Caller broke an interface contract (mismatched ladders, unequal masses, ...).
struct UsageError : Error {
    using Error::Error;
};

/// Linear or eigen solver failed; message carries diagnostics.
struct SolverError : Error {
    using Error::Error;
};

/// A requested decay target lies below the attainable abscissa.
struct InfeasibilityError : Error {
    using Error::Error;
};

/// Weight values overflow/underflow on the requested grid.
struct RangeError : Error {
    using Error::Error;
};

/// Contour crosses (or passes too close to) the computed spectrum.
struct ContourError : Error {
    using Error::Error;
};

/// Resolvent sample too close to the spectrum for a reliable solve.
struct ConditioningError : Error {
    using Error::Error;
};

/// Input data unusable for the requested fit (nonpositive norms, short window).
struct DataError : Error {
    using Error::Error;
};

} // namespace hypolab
