#pragma once

#include "qshoot/radial.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace qshoot {

class PotentialSpec;

/// V(r) = a/r + k r. The sign of a is taken as given.
struct Cornell {
    double a;
    double k;
};

/// V(r) = ln(a + b r), the F_i channel function of the hybrid matrix potential.
struct LogChannel {
    double a;
    double b;
};

/// V(r) = c r^p. Covers the oscillator (p = 2) and pure Coulomb (p = -1) oracles.
struct PowerLaw {
    double coefficient;
    double exponent;
};

/// Piecewise-linear table with strictly ascending abscissae. No extrapolation.
struct Tabulated {
    std::vector<double> r;
    std::vector<double> v;
};

/// Arbitrary callable, for corrections and tests.
struct Custom {
    ScalarField f;
    std::string label;
};

/// Potential living outside the process image (a plugin function).
class ExternalPotential {
public:
    virtual ~ExternalPotential() = default;
    virtual double eval(double r) const = 0;
    /// out[i] = V(r[i]). Must agree exactly with eval() element by element.
    virtual void eval_batch(std::span<const double> r, std::span<double> out) const = 0;
    virtual std::string describe() const = 0;
};

struct External {
    std::shared_ptr<const ExternalPotential> source;
};

struct Sum {
    std::vector<PotentialSpec> terms;
};

struct Scaled {
    double factor;
    std::vector<PotentialSpec> inner;  // exactly one element
};

using PotentialVariant = std::variant<Cornell, LogChannel, PowerLaw, Tabulated, Custom, External, Sum, Scaled>;

/// Immutable, cheaply copyable scalar potential V(r). The centrifugal term is not part of it.
class PotentialSpec {
public:
    static PotentialSpec cornell(double a, double k);
    static PotentialSpec log_channel(double a, double b);
    static PotentialSpec power_law(double coefficient, double exponent);
    static PotentialSpec tabulated(std::vector<double> r, std::vector<double> v);
    static PotentialSpec custom(ScalarField f, std::string label = "custom");
    static PotentialSpec external(std::shared_ptr<const ExternalPotential> source);
    static PotentialSpec sum(std::vector<PotentialSpec> terms);
    static PotentialSpec scaled(double factor, PotentialSpec inner);

    double operator()(double r) const;
    void eval_batch(std::span<const double> r, std::span<double> out) const;
    ScalarField field() const;

    const PotentialVariant& variant() const { return *node_; }
    std::string describe() const;

private:
    explicit PotentialSpec(PotentialVariant v);
    std::shared_ptr<const PotentialVariant> node_;
};

double eval_scalar(const PotentialSpec& spec, double r);

/// Linear interpolation, exact at knots. RangeError outside [r.front(), r.back()].
double eval_tabulated(const Tabulated& table, double r);

/// Two-column CSV (r,V); a non-numeric first line is taken as a header. Ascending r enforced.
Tabulated load_tabulated_csv(const std::filesystem::path& path);
Tabulated parse_tabulated_csv(const std::string& text);

/// Samples spec on the integrator's half-step grid with a single batch evaluation.
HalfGridSamples sample_half_grid(const PotentialSpec& spec, const RadialMesh& mesh);

// ---------------------------------------------------------------------------------------------

/// 2x2 hybrid potential with centrifugal entries built in:
///   [ (L+2)/(m r^2) + ln(a0 + b0 r)      -2 sqrt(L)/(m r^2)        ]
///   [ -2 sqrt(L)/(m r^2)                 L/(m r^2) + ln(a1 + b1 r) ],  L = l(l+1).
struct HybridLog {
    double a0;
    double b0;
    double a1;
    double b1;
    int l;
    double m;
};

/// N channels with scalar diagonal potentials and a symmetric coupling.
/// coupling(r, i, j) is only queried for i < j; an empty coupling means zero.
struct DiagonalPlusCoupling {
    std::vector<PotentialSpec> diagonal;
    std::function<double(double r, std::size_t i, std::size_t j)> coupling;
};

using MatrixPotentialVariant = std::variant<HybridLog, DiagonalPlusCoupling>;

class MatrixPotentialSpec {
public:
    static MatrixPotentialSpec hybrid_log(double a0, double b0, double a1, double b1, int l, double m);
    static MatrixPotentialSpec diagonal_plus_coupling(std::vector<PotentialSpec> diagonal,
                                                      std::function<double(double, std::size_t, std::size_t)> coupling = {});

    std::size_t n_channels() const;
    /// Row-major N x N into `out`; always symmetric.
    void eval(double r, std::span<double> out) const;
    std::vector<double> eval(double r) const;
    MatrixField field() const;

    const MatrixPotentialVariant& variant() const { return *node_; }

private:
    explicit MatrixPotentialSpec(MatrixPotentialVariant v);
    std::shared_ptr<const MatrixPotentialVariant> node_;
};

std::vector<double> eval_matrix(const MatrixPotentialSpec& spec, double r);

} // namespace qshoot
