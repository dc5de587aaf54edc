#pragma once

#include "qshoot/potentials.hpp"
#include "qshoot/radial.hpp"
#include "qshoot/shooting.hpp"

#include <cstddef>
#include <vector>

namespace qshoot {

/// -(1/m) u_i'' + V_ij(r, l) u_j = E u_i, with the centrifugal terms inside V.
struct CoupledProblem {
    MatrixPotentialSpec potential;
    int l;
    double mass;
    RadialMesh mesh;

    std::size_t n_channels() const { return potential.n_channels(); }
    void validate() const;
};

struct CoupledSolution {
    int n;
    int l;
    double energy;
    std::vector<RadialFunction> components;  ///< jointly normalized, zero beyond truncation_index
    std::vector<double> mixing;              ///< unit combination of the initial columns
    std::size_t truncation_index;
    double tail_residual;                    ///< |u(truncation_index)| after normalization
    int bisections;
};

/// Unit vector c minimizing |U(i_match) c|: the right singular direction of the smallest
/// singular value, signed so its largest-magnitude entry is positive.
/// Throws DegenerateError when U(i_match) is all zero.
std::vector<double> extract_combination(const ChannelTrajectory& t, std::size_t i_match);

/// Coupled-channel shooting by node counting on det U(r).
///
/// Columns start as U(r_min) = r_min I, U'(r_min) = I. The potential is sampled once; all
/// methods are const and thread-safe.
class CoupledSolver {
public:
    explicit CoupledSolver(CoupledProblem problem);

    const CoupledProblem& problem() const { return problem_; }

    StabilizedTrajectory propagate(double energy) const;
    std::size_t det_nodes_at(double energy) const;

    Bracket bracket(const ShootingConfig& cfg, int n) const;
    CoupledSolution solve(const ShootingConfig& cfg, int n) const;

private:
    CoupledProblem problem_;
    MatrixHalfGridSamples samples_;
};

CoupledSolution solve_coupled(const CoupledProblem& p, const ShootingConfig& cfg, int n);

} // namespace qshoot
