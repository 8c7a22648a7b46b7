#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace ctflow {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

struct SingularState : NumericError {
    using NumericError::NumericError;
};

struct SolutionPole : NumericError {
    using NumericError::NumericError;
};

struct NoClosedForm : Error {
    using Error::Error;
};

struct NoSimGraph : Error {
    using Error::Error;
};

struct DomainError : Error {
    using Error::Error;
};

struct BranchAmbiguity : Error {
    using Error::Error;
};

// Carries the furthest complex time reached before the step size underflowed
// or the singular locus fired.
struct SingularityEncountered : NumericError {
    std::complex<double> t_reached;

    SingularityEncountered(const std::string& what, std::complex<double> t)
        : NumericError(what), t_reached(t) {}
};

struct ToleranceNotMet : NumericError {
    using NumericError::NumericError;
};

struct AnchorOutsideGrid : ConfigError {
    using ConfigError::ConfigError;
};

struct NonUniformSampling : ConfigError {
    using ConfigError::ConfigError;
};

struct LengthNotPowerOfTwo : ConfigError {
    using ConfigError::ConfigError;
};

struct ZeroSignal : NumericError {
    using NumericError::NumericError;
};

struct NoFixedPointFound : NumericError {
    using NumericError::NumericError;
};

struct NoSpectralGap : NumericError {
    using NumericError::NumericError;
};

} // namespace ctflow
