#pragma once

#include "qshoot/mesh.hpp"
#include "qshoot/potentials.hpp"
#include "qshoot/radial.hpp"

#include <cstddef>
#include <vector>

namespace qshoot {

/// Parameters of the reduced radial equation
///   -(1/m) y'' + [l(l+1)/(m r^2) + V(r)] y = E y.
struct ShootingProblem {
    PotentialSpec potential;
    int l;
    double mass;
    RadialMesh mesh;

    void validate() const;
};

struct ShootingConfig {
    double e_min = 0.0;
    double e_max = 20.0;
    double scan_step = 0.05;
    double bisect_tol = 1e-9;
    int max_bisect = 200;
    /// Upper bound on concurrent propagations during the energy scan. Results do not depend on it.
    unsigned threads = 1;

    void validate() const;
};

/// Default grid: [1e-5, 30/sqrt(k/m)] for a confining Cornell potential, [1e-5, 30] otherwise,
/// 20001 points.
RadialMesh default_mesh(const PotentialSpec& potential, double mass);

/// Default scan settings, scaled with the mass.
ShootingConfig default_config(double mass);

/// Energies bracketing the n -> n+1 node-count transition: nodes(lower) <= n < nodes(upper).
struct Bracket {
    double lower;
    double upper;
    std::size_t lower_nodes;
    std::size_t upper_nodes;
};

struct EigenSolution {
    int n;
    int l;
    double energy;
    RadialFunction wavefunction;   ///< normalized, zero beyond truncation_index
    std::size_t truncation_index;
    double tail_residual;          ///< |y(truncation_index)| after normalization
    int bisections;
};

/// Shooting solver for one (V, l, m, mesh). Samples the potential once; every method is const
/// and safe to call concurrently.
class ShootingSolver {
public:
    explicit ShootingSolver(ShootingProblem problem);

    const ShootingProblem& problem() const { return problem_; }

    /// Regular solution y ~ r^(l+1) at energy E, unnormalized.
    RadialFunction propagate(double energy) const;
    std::size_t nodes_at(double energy) const;

    Bracket bracket(const ShootingConfig& cfg, int n) const;
    EigenSolution solve(const ShootingConfig& cfg, int n) const;
    /// Levels 0..n_max from a single energy scan.
    std::vector<EigenSolution> solve_levels(const ShootingConfig& cfg, int n_max) const;

private:
    EigenSolution refine(const ShootingConfig& cfg, int n, Bracket b) const;

    ShootingProblem problem_;
    HalfGridSamples samples_;
};

Bracket bracket_transition(const ShootingProblem& p, const ShootingConfig& cfg, int n);
EigenSolution solve_eigen(const ShootingProblem& p, const ShootingConfig& cfg, int n);

} // namespace qshoot

#include "qshoot/detail/scan.hpp"
