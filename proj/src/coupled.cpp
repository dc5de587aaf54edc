#include "qshoot/coupled.hpp"

#include "qshoot/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>

namespace qshoot {

namespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

Matrix to_matrix(std::span<const double> m, std::size_t n)
{
    const auto dim = static_cast<Eigen::Index>(n);
    Matrix out(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
        for (Eigen::Index j = 0; j < dim; ++j)
            out(i, j) = m[static_cast<std::size_t>(i * dim + j)];
    return out;
}

void fix_sign(std::vector<double>& c)
{
    std::size_t big = 0;
    for (std::size_t i = 1; i < c.size(); ++i)
        if (std::abs(c[i]) > std::abs(c[big]))
            big = i;
    if (c[big] < 0.0)
        for (double& x : c)
            x = -x;
}

// Smallest right singular direction of a 2x2 matrix via the eigenvector of A^T A.
std::vector<double> smallest_direction_2x2(std::span<const double> m)
{
    const double a = m[0], b = m[1], c = m[2], d = m[3];
    const double p = a * a + c * c;
    const double q = a * b + c * d;
    const double s = b * b + d * d;
    if (q == 0.0)
        return p <= s ? std::vector<double>{1.0, 0.0} : std::vector<double>{0.0, 1.0};
    const double half_diff = 0.5 * (p - s);
    const double lambda = 0.5 * (p + s) - std::hypot(half_diff, q);
    // Two algebraically equivalent eigenvectors; keep the better-conditioned one.
    double x1 = q, y1 = lambda - p;
    double x2 = lambda - s, y2 = q;
    const double n1 = std::hypot(x1, y1);
    const double n2 = std::hypot(x2, y2);
    if (n1 >= n2)
        return {x1 / n1, y1 / n1};
    return {x2 / n2, y2 / n2};
}

// Index of the lowest point of |det U_raw| in the tail. `sign` carries the sign of det U_raw,
// `log_abs` its log-magnitude.
std::size_t tail_minimum(const std::vector<double>& sign, const std::vector<double>& log_abs, std::size_t end)
{
    std::size_t start = 0;
    double previous = 0.0;
    for (std::size_t i = 0; i < end; ++i) {
        if (sign[i] == 0.0)
            continue;
        if (previous != 0.0 && std::signbit(sign[i]) != std::signbit(previous))
            start = i;
        previous = sign[i];
    }
    std::size_t i = start;
    while (i + 1 < end && log_abs[i + 1] >= log_abs[i])
        ++i;
    std::size_t best = i;
    for (std::size_t j = i; j < end; ++j)
        if (log_abs[j] < log_abs[best])
            best = j;
    return best;
}

struct Physical {
    std::vector<double> mixing;
    std::vector<std::vector<double>> components;
};

// Convergent combination at node `match` and its components on [0, match], from the
// stabilized factors U_raw(r_i) = F_i M_i, M_i = R_i M_{i-1}, M_{-1} = I.
Physical physical_combination(const StabilizedTrajectory& st, std::size_t match)
{
    const std::size_t n = st.frames.n_channels;
    const std::size_t nn = n * n;
    const auto dim = static_cast<Eigen::Index>(n);
    auto factor = [&](std::size_t i) { return to_matrix(std::span<const double>(st.factors.data() + i * nn, nn), n); };

    // M^{-1} = R_0^{-1} R_1^{-1} ... R_match^{-1}, kept at unit scale (only its direction matters).
    Matrix m_inv = Matrix::Identity(dim, dim);
    for (std::size_t i = 0; i <= match; ++i) {
        const Matrix r = factor(i);
        m_inv = r.transpose().triangularView<Eigen::Lower>().solve(m_inv.transpose()).transpose();
        const double scale = m_inv.cwiseAbs().maxCoeff();
        if (scale > 0.0 && std::isfinite(scale))
            m_inv /= scale;
    }
    const Matrix frame = to_matrix(st.frames.matrix(match), n);
    Eigen::FullPivLU<Matrix> frame_lu(frame);
    if (!frame_lu.isInvertible())
        throw DegenerateError("solution frame is singular at the matching point");
    const Matrix inverse_raw = m_inv * frame_lu.inverse();

    // U_raw = A; A^{-1} = V S^{-1} U^T, so the dominant singular pair of A^{-1} is the
    // smallest pair of A: left vector = c, right vector = A c / |A c|.
    Eigen::JacobiSVD<Matrix> svd(inverse_raw, Eigen::ComputeFullU | Eigen::ComputeFullV);
    std::vector<double> c(n);
    for (std::size_t k = 0; k < n; ++k)
        c[k] = svd.matrixU()(static_cast<Eigen::Index>(k), 0);
    fix_sign(c);

    Vector w = frame_lu.solve(Vector(svd.matrixV().col(0)));
    std::vector<std::vector<double>> comp(n, std::vector<double>(st.frames.mesh.size(), 0.0));
    for (std::size_t i = match + 1; i-- > 0;) {
        const Matrix f = to_matrix(st.frames.matrix(i), n);
        const Vector u = f * w;
        for (std::size_t k = 0; k < n; ++k)
            comp[k][i] = u(static_cast<Eigen::Index>(k));
        if (i > 0)
            w = factor(i).triangularView<Eigen::Upper>().solve(w);
    }
    // w now equals M_0 c up to scale; align the overall sign with c.
    const Vector c_back = factor(0).triangularView<Eigen::Upper>().solve(w);
    double dot = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        dot += c_back(static_cast<Eigen::Index>(k)) * c[k];
    if (dot < 0.0)
        for (auto& column : comp)
            for (double& x : column)
                x = -x;
    return {std::move(c), std::move(comp)};
}

} // namespace

void CoupledProblem::validate() const
{
    if (!(mass > 0.0) || !std::isfinite(mass))
        throw ConfigError("mass must be positive");
    if (l < 0)
        throw ConfigError("angular momentum l must be non-negative");
    if (n_channels() < 1)
        throw ConfigError("coupled problem needs at least one channel");
}

std::vector<double> extract_combination(const ChannelTrajectory& t, std::size_t i_match)
{
    if (i_match >= t.mesh.size())
        throw DomainError("matching index beyond the mesh");
    const std::size_t n = t.n_channels;
    const auto m = t.matrix(i_match);
    bool all_zero = true;
    for (double x : m) {
        if (!std::isfinite(x))
            throw DegenerateError("solution matrix is not finite at the matching point");
        all_zero = all_zero && x == 0.0;
    }
    if (all_zero)
        throw DegenerateError("solution matrix vanishes at the matching point");

    std::vector<double> c;
    if (n == 1) {
        c = {1.0};
    } else if (n == 2) {
        c = smallest_direction_2x2(m);
    } else {
        Eigen::JacobiSVD<Matrix> svd(to_matrix(m, n), Eigen::ComputeFullV);
        const Eigen::Index last = static_cast<Eigen::Index>(n) - 1;
        c.resize(n);
        for (std::size_t k = 0; k < n; ++k)
            c[k] = svd.matrixV()(static_cast<Eigen::Index>(k), last);
    }
    fix_sign(c);
    return c;
}

CoupledSolver::CoupledSolver(CoupledProblem problem)
    : problem_((problem.validate(), std::move(problem))),
      samples_(sample_half_grid(problem_.potential.field(), problem_.n_channels(), problem_.mesh))
{
}

StabilizedTrajectory CoupledSolver::propagate(double energy) const
{
    const std::size_t n = problem_.n_channels();
    std::vector<double> u0(n * n, 0.0);
    std::vector<double> du0(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        u0[i * n + i] = problem_.mesh.r_min();
        du0[i * n + i] = 1.0;
    }
    return propagate_coupled_stabilized(samples_, energy, problem_.mass, u0, du0);
}

std::size_t CoupledSolver::det_nodes_at(double energy) const
{
    return count_nodes(det_along(propagate(energy).frames));
}

Bracket CoupledSolver::bracket(const ShootingConfig& cfg, int n) const
{
    if (n < 0)
        throw ConfigError("node count must be non-negative");
    return detail::scan_for_transition(cfg, n, [this](double e) { return det_nodes_at(e); });
}

CoupledSolution CoupledSolver::solve(const ShootingConfig& cfg, int n) const
{
    int iterations = 0;
    const Bracket b = detail::bisect_transition(cfg, n, bracket(cfg, n),
                                                [this](double e) { return det_nodes_at(e); }, iterations);

    const StabilizedTrajectory st = propagate(b.lower);
    const RadialFunction det = det_along(st.frames);
    if (count_nodes(det) != static_cast<std::size_t>(n))
        throw ConvergenceError("levels " + std::to_string(n - 1) + " and " + std::to_string(n)
                                   + " are not resolved at bisect_tol",
                               b.lower, b.upper);

    const std::size_t end = det.valid_end();
    std::vector<double> log_abs(end);
    for (std::size_t i = 0; i < end; ++i)
        log_abs[i] = det.values[i] == 0.0 ? -std::numeric_limits<double>::infinity()
                                          : std::log(std::abs(det.values[i])) + st.log_scale[i];
    const std::size_t match = tail_minimum(det.values, log_abs, end);

    Physical phys = physical_combination(st, match);
    double total = 0.0;
    for (const auto& column : phys.components) {
        std::vector<double> sq(column.size());
        for (std::size_t i = 0; i < column.size(); ++i)
            sq[i] = column[i] * column[i];
        total += simpson(sq, problem_.mesh.step());
    }
    if (!(total > 0.0) || !std::isfinite(total))
        throw DegenerateError("coupled solution has zero norm");
    const double scale = 1.0 / std::sqrt(total);

    std::vector<RadialFunction> components;
    double residual = 0.0;
    for (auto& column : phys.components) {
        for (double& x : column)
            x *= scale;
        residual += column[match] * column[match];
        components.emplace_back(problem_.mesh, std::move(column));
    }
    return CoupledSolution{n,           problem_.l, b.lower, std::move(components), std::move(phys.mixing),
                           match,       std::sqrt(residual), iterations};
}

CoupledSolution solve_coupled(const CoupledProblem& p, const ShootingConfig& cfg, int n)
{
    return CoupledSolver(p).solve(cfg, n);
}

} // namespace qshoot
