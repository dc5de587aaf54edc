#pragma once

#include "qshoot/shooting.hpp"

#include <array>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <utility>
#include <vector>

namespace qshoot {

/// Leading-order potential plus the 1/m and 1/m^2 corrections, for one angular momentum.
///
/// Empty correction fields count as zero. Matrix elements carry `element_factor`, the
/// quantum-number dependent normalization of the operators; 1 gives the plain radial integral.
struct SpectrumModel {
    double mass;
    PotentialSpec v0;
    ScalarField v_1m;
    ScalarField v_1m2;
    int l;
    int basis_max = 20;
    ShootingConfig config;
    RadialMesh mesh;
    double element_factor = 1.0;

    void validate() const;
};

/// Default model: Cornell(a, k) at mass m, corrections off, default mesh and scan settings.
SpectrumModel cornell_model(double a, double k, double m, int l);

struct MassBreakdown {
    double e0;
    double lo;
    double nlo;
    double nnlo_diag;
    double nnlo_sum;
    double total;     ///< ((lo + nlo) + nnlo_diag) + nnlo_sum
    double sum_tail;  ///< |last included term of the state sum| / m^2
};

/// Caches the unperturbed levels 0..basis_max of one model. Thread-safe.
class SpectrumSolver {
public:
    explicit SpectrumSolver(SpectrumModel model);

    const SpectrumModel& model() const { return model_; }

    std::shared_ptr<const EigenSolution> level(int n) const;

    /// element_factor * integral y_n w y_n'. An empty weight means w = 1.
    double matrix_element(int n, int n_prime, const ScalarField& w) const;

    /// Sum over m' != n, m' <= basis_max of |<n|V1m|m'>|^2 / (E_n - E_m'), and the magnitude
    /// of the last included term. Not divided by m^2.
    std::pair<double, double> second_order_sum(int n) const;

    MassBreakdown mass_at_order(int n) const;

private:
    void ensure_levels(int n_max) const;

    SpectrumModel model_;
    ShootingSolver solver_;
    mutable std::mutex mutex_;
    mutable std::vector<std::shared_ptr<const EigenSolution>> levels_;
};

double matrix_element(const SpectrumModel& model, int n, int n_prime, const ScalarField& w);
std::pair<double, double> second_order_sum(const SpectrumModel& model, int n);
MassBreakdown mass_at_order(const SpectrumModel& model, int n);

// ---------------------------------------------------------------------------------------------

struct FitTarget {
    int n;
    int l;
    double mass;
};

struct FitOptions {
    int max_iterations = 50;
    /// Builds the model for a probe point. Defaults to cornell_model with the mesh held at the
    /// guess's default mesh.
    std::function<SpectrumModel(double a, double k, double m, int l)> model;
};

struct FitResult {
    double a;
    double k;
    double m;
    int iterations;
    std::array<double, 3> residuals;  ///< M_i(a, k, m) - target_i
};

/// Damped Newton on M_i(a, k, m) - M_target,i with a forward-difference Jacobian
/// (relative step 1e-5). Halves the step until the residual norm drops.
FitResult fit_parameters(const std::array<FitTarget, 3>& targets, std::array<double, 3> guess, double fit_tol,
                         const FitOptions& options = {});

} // namespace qshoot
