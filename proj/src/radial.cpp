#include "qshoot/radial.hpp"

#include "qshoot/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace qshoot {

namespace {

bool out_of_bounds(double x)
{
    return !std::isfinite(x) || std::abs(x) > divergence_threshold;
}

// out = G * U for N x N row-major blocks.
void multiply(std::size_t n, const double* g, const double* u, double* out)
{
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                acc += g[i * n + k] * u[k * n + j];
            out[i * n + j] = acc;
        }
}

// RK4 on U'' = G(r) U with state (U, U'). `coefficient(k, G)` fills G at half-grid node k.
// Returns the first index whose matrix left the finite range, if any; the matrices from that
// index on repeat the last good one.
template <typename Coefficient, typename AfterStep>
std::optional<std::size_t> integrate(const RadialMesh& mesh, std::size_t n, Coefficient&& coefficient,
                                     std::span<const double> u0, std::span<const double> du0,
                                     std::vector<double>& out, AfterStep&& after_step)
{
    const std::size_t nn = n * n;
    const std::size_t points = mesh.size();
    const double h = mesh.step();
    const double half = 0.5 * h;
    const double sixth = h / 6.0;

    out.assign(points * nn, 0.0);
    std::vector<double> u(u0.begin(), u0.end());
    std::vector<double> p(du0.begin(), du0.end());
    std::vector<double> g0(nn), gm(nn), g1(nn);
    std::vector<double> k1u(nn), k1p(nn), k2u(nn), k2p(nn), k3u(nn), k3p(nn), k4u(nn), k4p(nn), tmp(nn);

    after_step(std::size_t{0}, u, p);
    std::copy(u.begin(), u.end(), out.begin());
    coefficient(0, g0.data());

    for (std::size_t i = 0; i + 1 < points; ++i) {
        coefficient(2 * i + 1, gm.data());
        coefficient(2 * i + 2, g1.data());

        for (std::size_t e = 0; e < nn; ++e)
            k1u[e] = p[e];
        multiply(n, g0.data(), u.data(), k1p.data());

        for (std::size_t e = 0; e < nn; ++e) {
            tmp[e] = u[e] + half * k1u[e];
            k2u[e] = p[e] + half * k1p[e];
        }
        multiply(n, gm.data(), tmp.data(), k2p.data());

        for (std::size_t e = 0; e < nn; ++e) {
            tmp[e] = u[e] + half * k2u[e];
            k3u[e] = p[e] + half * k2p[e];
        }
        multiply(n, gm.data(), tmp.data(), k3p.data());

        for (std::size_t e = 0; e < nn; ++e) {
            tmp[e] = u[e] + h * k3u[e];
            k4u[e] = p[e] + h * k3p[e];
        }
        multiply(n, g1.data(), tmp.data(), k4p.data());

        bool bad = false;
        for (std::size_t e = 0; e < nn; ++e) {
            u[e] += sixth * (k1u[e] + 2.0 * k2u[e] + 2.0 * k3u[e] + k4u[e]);
            p[e] += sixth * (k1p[e] + 2.0 * k2p[e] + 2.0 * k3p[e] + k4p[e]);
            bad = bad || out_of_bounds(u[e]) || !std::isfinite(p[e]);
        }
        if (bad) {
            const double* last = out.data() + i * nn;
            for (std::size_t j = i + 1; j < points; ++j)
                std::copy(last, last + nn, out.begin() + static_cast<std::ptrdiff_t>(j * nn));
            return i + 1;
        }
        after_step(i + 1, u, p);
        std::copy(u.begin(), u.end(), out.begin() + static_cast<std::ptrdiff_t>((i + 1) * nn));
        std::swap(g0, g1);
    }
    return std::nullopt;
}

constexpr auto no_renormalization = [](std::size_t, std::vector<double>&, std::vector<double>&) {};

auto coupled_coefficient(const MatrixHalfGridSamples& potential, double energy, double mass)
{
    const std::size_t n = potential.n_channels;
    return [&potential, energy, mass, n](std::size_t k, double* g) {
        const double* v = potential.values.data() + k * n * n;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                g[i * n + j] = mass * (v[i * n + j] - (i == j ? energy : 0.0));
    };
}

void require_positive_mass(double mass)
{
    if (!(mass > 0.0) || !std::isfinite(mass))
        throw DomainError("mass must be positive and finite");
}

} // namespace

HalfGridSamples sample_half_grid(const ScalarField& field, const RadialMesh& mesh)
{
    HalfGridSamples s{mesh, std::vector<double>(mesh.half_size())};
    for (std::size_t k = 0; k < s.values.size(); ++k)
        s.values[k] = field(mesh.half_r(k));
    return s;
}

MatrixHalfGridSamples sample_half_grid(const MatrixField& field, std::size_t n_channels, const RadialMesh& mesh)
{
    if (n_channels == 0)
        throw ConfigError("matrix field needs at least one channel");
    const std::size_t nn = n_channels * n_channels;
    MatrixHalfGridSamples s{mesh, n_channels, std::vector<double>(mesh.half_size() * nn)};
    for (std::size_t k = 0; k < mesh.half_size(); ++k)
        field(mesh.half_r(k), std::span<double>(s.values.data() + k * nn, nn));
    return s;
}

RadialFunction propagate_radial(const ScalarField& potential, double energy, int l, double mass,
                                const RadialMesh& mesh, double y0, double dy0)
{
    return propagate_radial(sample_half_grid(potential, mesh), energy, l, mass, y0, dy0);
}

RadialFunction propagate_radial(const HalfGridSamples& potential, double energy, int l, double mass,
                                double y0, double dy0)
{
    require_positive_mass(mass);
    if (l < 0)
        throw DomainError("angular momentum must be non-negative");
    const RadialMesh& mesh = potential.mesh;
    const double centrifugal = static_cast<double>(l) * static_cast<double>(l + 1);
    auto coefficient = [&](std::size_t k, double* g) {
        const double r = mesh.half_r(k);
        g[0] = centrifugal / (r * r) + mass * (potential.values[k] - energy);
    };
    const double u0[1] = {y0};
    const double du0[1] = {dy0};
    std::vector<double> values;
    auto div = integrate(mesh, 1, coefficient, u0, du0, values, no_renormalization);
    return RadialFunction(mesh, std::move(values), div);
}

ChannelTrajectory propagate_coupled(const MatrixField& potential, std::size_t n_channels, double energy,
                                    double mass, const RadialMesh& mesh, std::span<const double> u0,
                                    std::span<const double> du0)
{
    return propagate_coupled(sample_half_grid(potential, n_channels, mesh), energy, mass, u0, du0);
}

ChannelTrajectory propagate_coupled(const MatrixHalfGridSamples& potential, double energy, double mass,
                                    std::span<const double> u0, std::span<const double> du0)
{
    require_positive_mass(mass);
    const std::size_t n = potential.n_channels;
    const std::size_t nn = n * n;
    if (u0.size() != nn || du0.size() != nn)
        throw ConfigError("initial matrices must be " + std::to_string(n) + "x" + std::to_string(n));
    auto coefficient = coupled_coefficient(potential, energy, mass);
    ChannelTrajectory t{potential.mesh, n, {}, std::nullopt};
    t.diverged_at = integrate(potential.mesh, n, coefficient, u0, du0, t.data, no_renormalization);
    return t;
}

StabilizedTrajectory propagate_coupled_stabilized(const MatrixHalfGridSamples& potential, double energy,
                                                  double mass, std::span<const double> u0,
                                                  std::span<const double> du0)
{
    require_positive_mass(mass);
    const std::size_t n = potential.n_channels;
    const std::size_t nn = n * n;
    if (u0.size() != nn || du0.size() != nn)
        throw ConfigError("initial matrices must be " + std::to_string(n) + "x" + std::to_string(n));
    auto coefficient = coupled_coefficient(potential, energy, mass);

    StabilizedTrajectory s{ChannelTrajectory{potential.mesh, n, {}, std::nullopt}, {}, {}};
    s.factors.assign(potential.mesh.size() * nn, 0.0);
    s.log_scale.assign(potential.mesh.size(), 0.0);
    double log_scale = 0.0;

    // Modified Gram-Schmidt on the stacked 2N x N state [U; U'], R with positive diagonal.
    auto orthonormalize = [&](std::size_t i, std::vector<double>& u, std::vector<double>& p) {
        double* r = s.factors.data() + i * nn;
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t k = 0; k < j; ++k) {
                double dot = 0.0;
                for (std::size_t row = 0; row < n; ++row)
                    dot += u[row * n + k] * u[row * n + j] + p[row * n + k] * p[row * n + j];
                r[k * n + j] = dot;
                for (std::size_t row = 0; row < n; ++row) {
                    u[row * n + j] -= dot * u[row * n + k];
                    p[row * n + j] -= dot * p[row * n + k];
                }
            }
            double norm = 0.0;
            for (std::size_t row = 0; row < n; ++row)
                norm += u[row * n + j] * u[row * n + j] + p[row * n + j] * p[row * n + j];
            norm = std::sqrt(norm);
            if (!(norm > 0.0))
                throw DegenerateError("coupled solutions became linearly dependent");
            r[j * n + j] = norm;
            log_scale += std::log(norm);
            for (std::size_t row = 0; row < n; ++row) {
                u[row * n + j] /= norm;
                p[row * n + j] /= norm;
            }
        }
        s.log_scale[i] = log_scale;
    };
    s.frames.diverged_at = integrate(potential.mesh, n, coefficient, u0, du0, s.frames.data, orthonormalize);
    return s;
}

std::size_t count_nodes(const RadialFunction& f, std::size_t i_stop)
{
    if (i_stop == 0 || i_stop >= f.size())
        throw DomainError("node count stop index " + std::to_string(i_stop) + " outside (0, "
                          + std::to_string(f.size()) + ")");
    std::size_t nodes = 0;
    double previous = 0.0;
    for (std::size_t i = 0; i <= i_stop; ++i) {
        const double v = f.values[i];
        if (v == 0.0)
            continue;
        if (previous != 0.0 && std::signbit(v) != std::signbit(previous))
            ++nodes;
        previous = v;
    }
    return nodes;
}

std::size_t count_nodes(const RadialFunction& f)
{
    return count_nodes(f, std::max<std::size_t>(f.valid_end(), 2) - 1);
}

std::size_t find_truncation_index(const RadialFunction& f, std::optional<std::size_t> turning_index)
{
    const std::size_t end = std::max<std::size_t>(f.valid_end(), 1);

    std::size_t start = 0;
    bool any_nonzero = false;
    double previous = 0.0;
    for (std::size_t i = 0; i < end; ++i) {
        const double v = f.values[i];
        if (v == 0.0)
            continue;
        any_nonzero = true;
        if (previous != 0.0 && std::signbit(v) != std::signbit(previous))
            start = i;
        previous = v;
    }
    if (!any_nonzero)
        throw DegenerateError("cannot locate the tail of an identically zero function");
    if (turning_index && *turning_index > start)
        start = std::min(*turning_index, end - 1);

    // Climb the last lobe, then take the lowest point of what follows.
    std::size_t i = start;
    while (i + 1 < end && std::abs(f.values[i + 1]) >= std::abs(f.values[i]))
        ++i;
    std::size_t best = i;
    for (std::size_t j = i; j < end; ++j)
        if (std::abs(f.values[j]) < std::abs(f.values[best]))
            best = j;
    return best;
}

double norm_squared(const RadialFunction& f)
{
    std::vector<double> sq(f.size());
    for (std::size_t i = 0; i < f.size(); ++i)
        sq[i] = f.values[i] * f.values[i];
    return simpson(sq, f.mesh.step());
}

RadialFunction normalize(const RadialFunction& f, std::size_t i_trunc)
{
    if (i_trunc >= f.size())
        throw DomainError("truncation index beyond the mesh");
    std::vector<double> v(f.values);
    for (std::size_t i = i_trunc + 1; i < v.size(); ++i)
        v[i] = 0.0;
    RadialFunction out(f.mesh, std::move(v));
    const double n2 = norm_squared(out);
    if (!(n2 > 0.0) || !std::isfinite(n2))
        throw DegenerateError("cannot normalize a function of zero norm");
    const double scale = 1.0 / std::sqrt(n2);
    for (double& x : out.values)
        x *= scale;
    return out;
}

double integrate_product(const RadialFunction& f, const ScalarField& weight, const RadialFunction& g)
{
    if (!(f.mesh == g.mesh))
        throw ConfigError("integrate_product: functions live on different meshes");
    std::vector<double> integrand(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double w = weight ? weight(f.mesh.r(i)) : 1.0;
        integrand[i] = w * (f.values[i] * g.values[i]);  // f g first keeps the result symmetric
    }
    return simpson(integrand, f.mesh.step());
}

RadialFunction det_along(const ChannelTrajectory& t)
{
    const std::size_t n = t.n_channels;
    std::vector<double> det(t.mesh.size());
    for (std::size_t i = 0; i < det.size(); ++i) {
        const auto m = t.matrix(i);
        if (n == 1) {
            det[i] = m[0];
        } else if (n == 2) {
            det[i] = m[0] * m[3] - m[1] * m[2];
        } else {
            Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> a(
                m.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
            det[i] = a.partialPivLu().determinant();
        }
    }
    return RadialFunction(t.mesh, std::move(det), t.diverged_at);
}

} // namespace qshoot
