#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace qshoot {

/// Uniform radial grid on [r_min, r_max] (lengths in units of 1/m).
class RadialMesh {
public:
    /// Throws ConfigError unless 0 < r_min < r_max and n_points >= 16.
    RadialMesh(double r_min, double r_max, std::size_t n_points);

    double r_min() const { return r_min_; }
    double r_max() const { return r_max_; }
    std::size_t size() const { return n_points_; }
    double step() const { return h_; }

    /// Mesh node i. Computed as r_min + i h, never accumulated.
    double r(std::size_t i) const { return r_min_ + static_cast<double>(i) * h_; }

    /// Node of the half-step grid used by the integrator, k = 0 .. 2(n-1).
    double half_r(std::size_t k) const { return r_min_ + static_cast<double>(k) * (0.5 * h_); }
    std::size_t half_size() const { return 2 * n_points_ - 1; }

    std::vector<double> nodes() const;

    bool operator==(const RadialMesh&) const = default;

private:
    double r_min_;
    double r_max_;
    std::size_t n_points_;
    double h_;
};

/// A real function sampled on a RadialMesh, e.g. a reduced wavefunction y(r).
///
/// When produced by an integrator that hit the divergence guard, `diverged_at` holds the first
/// index whose value was not trustworthy; samples from there on repeat the last finite value.
struct RadialFunction {
    RadialFunction(RadialMesh m, std::vector<double> v, std::optional<std::size_t> div = std::nullopt);

    RadialMesh mesh;
    std::vector<double> values;
    std::optional<std::size_t> diverged_at;

    /// One past the last trustworthy sample.
    std::size_t valid_end() const { return diverged_at.value_or(values.size()); }
    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
};

/// Composite Simpson on uniform samples; an odd number of intervals closes with one trapezoid panel.
double simpson(std::span<const double> samples, double h);

} // namespace qshoot
