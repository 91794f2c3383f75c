#pragma once

#include <stdexcept>
#include <string>

namespace nef {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// --- series-core ---

class ZeroConstantTerm : public Error {
public:
    using Error::Error;
};

class NonpositiveConstantTerm : public Error {
public:
    using Error::Error;
};

class NonzeroInnerConstant : public Error {
public:
    using Error::Error;
};

// Raised when a coefficient pipeline leaves double range instead of
// silently returning inf/nan.
class CoefficientOverflow : public Error {
public:
    using Error::Error;
};

// --- nef-core ---

class ThetaOutOfDomain : public Error {
public:
    using Error::Error;
};

class MeanOutOfDomain : public Error {
public:
    using Error::Error;
};

class SamplerUnavailable : public Error {
public:
    using Error::Error;
};

// --- discrete pipeline ---

class NotInfinitelyDivisible : public Error {
public:
    using Error::Error;
};

class AbsoluteContinuityViolated : public Error {
public:
    using Error::Error;
};

// Bernoulli-type families put no mass outside two atoms, so the
// variance-function reduction degenerates and no ratio exists.
class BernoulliNoRf : public Error {
public:
    using Error::Error;
};

// --- continuous reduction functions ---

// A closed-form candidate failed its Laplace-transform validation; carries
// the worst measured relative discrepancy.
class FormulaInvalid : public Error {
public:
    FormulaInvalid(const std::string& what, double max_relerr)
        : Error(what), max_relative_error(max_relerr) {}
    double max_relative_error = 0.0;
};

class NonConvergent : public Error {
public:
    using Error::Error;
};

class SeriesDiverged : public Error {
public:
    using Error::Error;
};

class TailTooHeavy : public Error {
public:
    using Error::Error;
};

// --- residue verification ---

class ToleranceNotMet : public Error {
public:
    using Error::Error;
};

// --- latent simulation ---

class RfUnavailable : public Error {
public:
    using Error::Error;
};

// Top-r spectral gap fell below resolution; the recovered subspace is
// not identified.
class DegenerateSpectrum : public Error {
public:
    using Error::Error;
};

}  // namespace nef
