#pragma once

#include <stdexcept>
#include <string>

namespace rfdiss {

/// Argument outside the mathematical domain of an operation (negative time,
/// θ outside [-Δ,0], h ≥ Δ, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Malformed or inconsistent configuration: unknown mode, bad dimensions,
/// unknown semi-norm kind.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values produced by a vector field or functional.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Query outside the tabulated range of a comparison function.
class RangeError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Seam mismatch when gluing solution data onto a history.
class ConsistencyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Randomized probe produced no usable sample.
class SamplingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace rfdiss
