#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qshoot {

/// Root of every error thrown by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the domain of a function (r <= 0, log of a non-positive number, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Query outside a tabulated range. No extrapolation is ever attempted.
class RangeError : public Error {
public:
    using Error::Error;
};

/// Malformed configuration, mesh or problem definition.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input for which the requested quantity is undefined (all-zero function, zero norm, ...).
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// The energy scan found no node-count transition for the requested level.
class NotBracketedError : public Error {
public:
    using Error::Error;
};

/// An iterative procedure ran out of iterations. Carries the best bracket found so far.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double lo, double hi)
        : Error(what), lower(lo), upper(hi) {}
    double lower;
    double upper;
};

/// Perturbation theory breaks down (degenerate unperturbed levels).
class PerturbationError : public Error {
public:
    using Error::Error;
};

/// Newton step could not be solved for.
class SingularJacobianError : public Error {
public:
    using Error::Error;
};

/// The parameter fit hit its iteration cap or stalled. Carries the best point reached.
class FitError : public Error {
public:
    FitError(const std::string& what, double a_, double k_, double m_, double residual)
        : Error(what), a(a_), k(k_), m(m_), max_residual(residual) {}
    double a;
    double k;
    double m;
    double max_residual;
};

/// Base class for everything raised by the plugin host.
class PluginError : public Error {
public:
    using Error::Error;
};

/// dlopen/dlsym failure.
class PluginLoadError : public PluginError {
public:
    using PluginError::PluginError;
};

enum class ManifestErrorKind { Syntax, Arity, Type, Length, Duplicate, Missing };

/// Manifest text could not be parsed. `line` is 1-based, 0 when not tied to a line.
class ManifestError : public PluginError {
public:
    ManifestError(ManifestErrorKind k, std::size_t l, const std::string& msg)
        : PluginError("manifest line " + std::to_string(l) + ": " + msg), kind(k), line(l) {}
    ManifestErrorKind kind;
    std::size_t line;
};

enum class ShapeErrorKind { Arity, Type, Length, Override, Overrun, UnknownFunction };

/// A call or override does not match the declared shape of a plugin function.
/// `argument` is the offending input index for Type and Length, the position in the foreign
/// signature (outputs first) for Overrun, and -1 when the whole call is at fault.
class ShapeError : public PluginError {
public:
    ShapeError(ShapeErrorKind k, int arg, const std::string& msg)
        : PluginError(msg), kind(k), argument(arg) {}
    ShapeErrorKind kind;
    int argument;
};

/// A plugin function cannot serve as a potential.
class AdapterError : public PluginError {
public:
    using PluginError::PluginError;
};

} // namespace qshoot
