#pragma once

#include "qshoot/mesh.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace qshoot {

using ScalarField = std::function<double(double)>;

/// Fills `out` (row-major N x N) with the matrix field at r.
using MatrixField = std::function<void(double r, std::span<double> out)>;

/// Magnitude above which a propagated value counts as diverged.
inline constexpr double divergence_threshold = 1e150;

/// Scalar field sampled on the integrator's half-step grid (see RadialMesh::half_r).
struct HalfGridSamples {
    RadialMesh mesh;
    std::vector<double> values;
};

/// N x N matrix field sampled on the half-step grid, row-major per node.
struct MatrixHalfGridSamples {
    RadialMesh mesh;
    std::size_t n_channels;
    std::vector<double> values;
};

HalfGridSamples sample_half_grid(const ScalarField& field, const RadialMesh& mesh);
MatrixHalfGridSamples sample_half_grid(const MatrixField& field, std::size_t n_channels, const RadialMesh& mesh);

/// N x N solution matrices U(r_i), one per mesh node; columns are independent solutions.
struct ChannelTrajectory {
    RadialMesh mesh;
    std::size_t n_channels;
    std::vector<double> data;
    std::optional<std::size_t> diverged_at;

    std::span<const double> matrix(std::size_t i) const
    {
        const std::size_t nn = n_channels * n_channels;
        return {data.data() + i * nn, nn};
    }
    double entry(std::size_t i, std::size_t row, std::size_t col) const
    {
        return data[i * n_channels * n_channels + row * n_channels + col];
    }
    std::size_t valid_end() const { return diverged_at.value_or(mesh.size()); }
};

/// Integrates y'' = [l(l+1)/r^2 + m (V(r) - E)] y outward from r_min with classical RK4
/// on (y, y'), starting from y(r_min) = y0, y'(r_min) = dy0.
RadialFunction propagate_radial(const ScalarField& potential, double energy, int l, double mass,
                                const RadialMesh& mesh, double y0, double dy0);

/// Same as above with the potential pre-sampled; used by the solvers to sample once per problem.
RadialFunction propagate_radial(const HalfGridSamples& potential, double energy, int l, double mass,
                                double y0, double dy0);

/// Integrates U'' = m (V(r) U - E U) column-wise. V carries its own centrifugal terms.
/// U0 and dU0 are row-major N x N.
ChannelTrajectory propagate_coupled(const MatrixField& potential, std::size_t n_channels, double energy,
                                    double mass, const RadialMesh& mesh, std::span<const double> u0,
                                    std::span<const double> du0);

ChannelTrajectory propagate_coupled(const MatrixHalfGridSamples& potential, double energy, double mass,
                                    std::span<const double> u0, std::span<const double> du0);

/// Coupled propagation with the solution space re-orthonormalized after every step.
///
/// Raw columns of U collapse onto the fastest-growing mode, after which det U is lost to
/// cancellation. Here the stacked state [U; U'] is replaced after each step by Q with
/// [U; U'] = Q R, R upper triangular with positive diagonal, so
///   U_raw(r_i) = frames(r_i) * R_i * R_{i-1} * ... * R_0
/// and sign det U_raw = sign det frames. `log_scale[i]` is the sum of log det R_k for k <= i.
struct StabilizedTrajectory {
    ChannelTrajectory frames;
    std::vector<double> factors;  ///< R_i, row-major N x N per node
    std::vector<double> log_scale;
};

StabilizedTrajectory propagate_coupled_stabilized(const MatrixHalfGridSamples& potential, double energy,
                                                  double mass, std::span<const double> u0,
                                                  std::span<const double> du0);

/// Strict sign changes between consecutive nonzero samples in [0, i_stop]. Zeros are skipped.
std::size_t count_nodes(const RadialFunction& f, std::size_t i_stop);

/// Node count over the trustworthy part of f.
std::size_t count_nodes(const RadialFunction& f);

/// Index where the decaying tail bottoms out: skip past the last sign change (or the supplied
/// turning-point index, whichever lies further out), climb the remaining lobe, and return the
/// argmin of |y| beyond it. Throws DegenerateError when f is identically zero.
std::size_t find_truncation_index(const RadialFunction& f, std::optional<std::size_t> turning_index = std::nullopt);

/// Zeroes samples beyond i_trunc and rescales so the Simpson integral of y^2 is 1.
RadialFunction normalize(const RadialFunction& f, std::size_t i_trunc);

/// Simpson integral of y^2.
double norm_squared(const RadialFunction& f);

/// Simpson integral of f(r) w(r) g(r). An empty weight means w = 1.
/// Throws ConfigError when the meshes differ.
double integrate_product(const RadialFunction& f, const ScalarField& weight, const RadialFunction& g);

/// det U(r_i) at every node. Closed form for N <= 2, LU otherwise.
RadialFunction det_along(const ChannelTrajectory& t);

} // namespace qshoot
