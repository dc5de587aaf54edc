#include "qshoot/spectrum.hpp"

#include "qshoot/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace qshoot {

void SpectrumModel::validate() const
{
    if (!(mass > 0.0) || !std::isfinite(mass))
        throw ConfigError("quark mass must be positive");
    if (l < 0)
        throw ConfigError("angular momentum l must be non-negative");
    if (basis_max < 1)
        throw ConfigError("basis_max must be at least 1");
    if (!std::isfinite(element_factor))
        throw ConfigError("element_factor must be finite");
    config.validate();
}

SpectrumModel cornell_model(double a, double k, double m, int l)
{
    const auto v0 = PotentialSpec::cornell(a, k);
    return SpectrumModel{m, v0, {}, {}, l, 20, default_config(m), default_mesh(v0, m)};
}

SpectrumSolver::SpectrumSolver(SpectrumModel model)
    : model_((model.validate(), std::move(model))),
      solver_(ShootingProblem{model_.v0, model_.l, model_.mass, model_.mesh})
{
}

void SpectrumSolver::ensure_levels(int n_max) const
{
    std::lock_guard lock(mutex_);
    if (static_cast<int>(levels_.size()) > n_max)
        return;
    auto solved = solver_.solve_levels(model_.config, n_max);
    // solve_levels is deterministic, so levels already handed out are reproduced unchanged.
    for (std::size_t n = levels_.size(); n < solved.size(); ++n)
        levels_.push_back(std::make_shared<const EigenSolution>(std::move(solved[n])));
}

std::shared_ptr<const EigenSolution> SpectrumSolver::level(int n) const
{
    if (n < 0)
        throw ConfigError("level index must be non-negative");
    ensure_levels(n);
    std::lock_guard lock(mutex_);
    return levels_[static_cast<std::size_t>(n)];
}

double SpectrumSolver::matrix_element(int n, int n_prime, const ScalarField& w) const
{
    ensure_levels(std::max(n, n_prime));
    const auto a = level(n);
    const auto b = level(n_prime);
    return model_.element_factor * integrate_product(a->wavefunction, w, b->wavefunction);
}

std::pair<double, double> SpectrumSolver::second_order_sum(int n) const
{
    if (!model_.v_1m)
        return {0.0, 0.0};
    ensure_levels(std::max(n, model_.basis_max));
    const double e_n = level(n)->energy;
    const double degenerate = 10.0 * model_.config.bisect_tol;
    double value = 0.0;
    double last = 0.0;
    for (int k = 0; k <= model_.basis_max; ++k) {
        if (k == n)
            continue;
        const double gap = e_n - level(k)->energy;
        if (std::abs(gap) <= degenerate)
            throw PerturbationError("levels " + std::to_string(n) + " and " + std::to_string(k)
                                    + " are degenerate; second-order perturbation theory is undefined");
        const double element = matrix_element(n, k, model_.v_1m);
        last = element * element / gap;
        value += last;
    }
    return {value, std::abs(last)};
}

MassBreakdown SpectrumSolver::mass_at_order(int n) const
{
    const double m = model_.mass;
    MassBreakdown b{};
    b.e0 = level(n)->energy;
    b.lo = 2.0 * m + b.e0;
    b.nlo = model_.v_1m ? matrix_element(n, n, model_.v_1m) / m : 0.0;
    b.nnlo_diag = model_.v_1m2 ? matrix_element(n, n, model_.v_1m2) / (m * m) : 0.0;
    const auto [sum, tail] = second_order_sum(n);
    b.nnlo_sum = sum / (m * m);
    b.sum_tail = tail / (m * m);
    b.total = b.lo + b.nlo + b.nnlo_diag + b.nnlo_sum;
    return b;
}

double matrix_element(const SpectrumModel& model, int n, int n_prime, const ScalarField& w)
{
    return SpectrumSolver(model).matrix_element(n, n_prime, w);
}

std::pair<double, double> second_order_sum(const SpectrumModel& model, int n)
{
    return SpectrumSolver(model).second_order_sum(n);
}

MassBreakdown mass_at_order(const SpectrumModel& model, int n)
{
    return SpectrumSolver(model).mass_at_order(n);
}

// ---------------------------------------------------------------------------------------------

namespace {

using Params = std::array<double, 3>;
using Residuals = std::array<double, 3>;

double max_abs(const Residuals& r)
{
    return std::max({std::abs(r[0]), std::abs(r[1]), std::abs(r[2])});
}

double norm(const Residuals& r)
{
    return std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]);
}

} // namespace

FitResult fit_parameters(const std::array<FitTarget, 3>& targets, std::array<double, 3> guess, double fit_tol,
                         const FitOptions& options)
{
    if (!(fit_tol > 0.0))
        throw ConfigError("fit tolerance must be positive");
    if (options.max_iterations < 1)
        throw ConfigError("max_iterations must be at least 1");
    for (const auto& t : targets)
        if (t.n < 0 || t.l < 0 || !std::isfinite(t.mass))
            throw ConfigError("fit target needs n >= 0, l >= 0 and a finite mass");

    auto factory = options.model;
    if (!factory) {
        const RadialMesh mesh = default_mesh(PotentialSpec::cornell(guess[0], guess[1]), guess[2]);
        factory = [mesh](double a, double k, double m, int l) {
            SpectrumModel model = cornell_model(a, k, m, l);
            model.mesh = mesh;
            return model;
        };
    }

    auto evaluate = [&](const Params& p) {
        std::map<int, std::unique_ptr<SpectrumSolver>> by_l;
        Residuals r{};
        for (std::size_t i = 0; i < 3; ++i) {
            auto& solver = by_l[targets[i].l];
            if (!solver)
                solver = std::make_unique<SpectrumSolver>(factory(p[0], p[1], p[2], targets[i].l));
            r[i] = solver->mass_at_order(targets[i].n).total - targets[i].mass;
        }
        return r;
    };

    Params p = guess;
    Residuals r = evaluate(p);
    int iterations = 0;
    while (true) {
        if (max_abs(r) < fit_tol)
            return FitResult{p[0], p[1], p[2], iterations, r};
        if (iterations == options.max_iterations)
            throw FitError("fit did not converge in " + std::to_string(iterations) + " iterations", p[0], p[1],
                           p[2], max_abs(r));

        Eigen::Matrix3d jacobian;
        for (int j = 0; j < 3; ++j) {
            Params q = p;
            const double h = 1e-5 * (p[j] != 0.0 ? std::abs(p[j]) : 1.0);
            q[j] += h;
            const Residuals rq = evaluate(q);
            for (int i = 0; i < 3; ++i)
                jacobian(i, j) = (rq[i] - r[i]) / h;
        }
        Eigen::FullPivLU<Eigen::Matrix3d> lu(jacobian);
        if (lu.rank() < 3)
            throw SingularJacobianError("fit Jacobian is singular; are two targets the same state?");
        const Eigen::Vector3d step = lu.solve(-Eigen::Vector3d(r[0], r[1], r[2]));

        bool accepted = false;
        double lambda = 1.0;
        for (int halving = 0; halving < 30 && !accepted; ++halving, lambda *= 0.5) {
            const Params trial{p[0] + lambda * step(0), p[1] + lambda * step(1), p[2] + lambda * step(2)};
            if (!(trial[2] > 0.0))
                continue;
            try {
                const Residuals rt = evaluate(trial);
                if (norm(rt) < norm(r)) {
                    p = trial;
                    r = rt;
                    accepted = true;
                }
            } catch (const NotBracketedError&) {
            } catch (const ConvergenceError&) {
            } catch (const ConfigError&) {
            }
        }
        if (!accepted)
            throw FitError("fit stalled: no damped step reduces the residual", p[0], p[1], p[2], max_abs(r));
        ++iterations;
    }
}

} // namespace qshoot
