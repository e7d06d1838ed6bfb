#pragma once

#include <stdexcept>
#include <string>

namespace lawline {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invariant or argument violation in domain data (bad field values, mixed units, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A requested dataset label is absent from the records at hand.
class MissingDataError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// A file parsed fine but yielded zero usable records.
class EmptyInputError : public Error {
public:
    using Error::Error;
};

/// Not enough data points to determine the model parameters.
class UnderdeterminedError : public Error {
public:
    using Error::Error;
};

/// All checkpoints share one parameter count or one token count, so the full
/// compute-to-loss surface cannot be fitted; callers switch to the min-loss
/// irreducible-error fallback.
class NoAxisVariationError : public UnderdeterminedError {
public:
    using UnderdeterminedError::UnderdeterminedError;
};

class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Two curves cannot be compared (unit or dataset-pair mismatch).
class InvalidComparisonError : public Error {
public:
    using Error::Error;
};

/// Two laws cannot be composed (dataset or configuration mismatch).
class InvalidCompositionError : public Error {
public:
    using Error::Error;
};

/// R^2 is undefined because the targets have zero variance.
class UndefinedVarianceError : public Error {
public:
    using Error::Error;
};

} // namespace lawline
