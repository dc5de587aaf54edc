#include "qshoot/shooting.hpp"

#include "qshoot/errors.hpp"

#include <cmath>
#include <string>

namespace qshoot {

void ShootingProblem::validate() const
{
    if (!(mass > 0.0) || !std::isfinite(mass))
        throw ConfigError("mass must be positive");
    if (l < 0)
        throw ConfigError("angular momentum l must be non-negative");
}

void ShootingConfig::validate() const
{
    if (!std::isfinite(e_min) || !std::isfinite(e_max) || !(e_min < e_max))
        throw ConfigError("energy window needs e_min < e_max");
    if (!(scan_step > 0.0) || !std::isfinite(scan_step))
        throw ConfigError("scan_step must be positive");
    if (!(bisect_tol > 0.0))
        throw ConfigError("bisect_tol must be positive");
    if (max_bisect < 1)
        throw ConfigError("max_bisect must be at least 1");
}

RadialMesh default_mesh(const PotentialSpec& potential, double mass)
{
    double r_max = 30.0;
    if (const auto* c = std::get_if<Cornell>(&potential.variant()); c && c->k > 0.0)
        r_max = 30.0 / std::sqrt(c->k / mass);
    return RadialMesh(1e-5, r_max, 20001);
}

ShootingConfig default_config(double mass)
{
    ShootingConfig cfg;
    cfg.scan_step = 0.05 * mass;
    cfg.bisect_tol = 1e-9 * mass;
    cfg.max_bisect = 200;
    return cfg;
}

ShootingSolver::ShootingSolver(ShootingProblem problem)
    : problem_((problem.validate(), std::move(problem))),
      samples_(sample_half_grid(problem_.potential, problem_.mesh))
{
}

RadialFunction ShootingSolver::propagate(double energy) const
{
    const double r0 = problem_.mesh.r_min();
    const int l = problem_.l;
    const double y0 = std::pow(r0, l + 1);
    const double dy0 = (l + 1) * std::pow(r0, l);
    return propagate_radial(samples_, energy, l, problem_.mass, y0, dy0);
}

std::size_t ShootingSolver::nodes_at(double energy) const
{
    return count_nodes(propagate(energy));
}

Bracket ShootingSolver::bracket(const ShootingConfig& cfg, int n) const
{
    if (n < 0)
        throw ConfigError("node count must be non-negative");
    return detail::scan_for_transition(cfg, n, [this](double e) { return nodes_at(e); });
}

EigenSolution ShootingSolver::refine(const ShootingConfig& cfg, int n, Bracket b) const
{
    int iterations = 0;
    b = detail::bisect_transition(cfg, n, b, [this](double e) { return nodes_at(e); }, iterations);

    const RadialFunction raw = propagate(b.lower);
    if (count_nodes(raw) != static_cast<std::size_t>(n))
        throw ConvergenceError("levels " + std::to_string(n - 1) + " and " + std::to_string(n)
                                   + " are not resolved at bisect_tol",
                               b.lower, b.upper);
    const std::size_t cut = find_truncation_index(raw);
    RadialFunction y = normalize(raw, cut);
    const double residual = std::abs(y.values[cut]);
    return EigenSolution{n, problem_.l, b.lower, std::move(y), cut, residual, iterations};
}

EigenSolution ShootingSolver::solve(const ShootingConfig& cfg, int n) const
{
    return refine(cfg, n, bracket(cfg, n));
}

std::vector<EigenSolution> ShootingSolver::solve_levels(const ShootingConfig& cfg, int n_max) const
{
    if (n_max < 0)
        throw ConfigError("level count must be non-negative");
    auto count = [this](double e) { return nodes_at(e); };
    detail::EnergyScan<decltype(count)> scan(cfg, count);
    std::vector<EigenSolution> levels;
    levels.reserve(static_cast<std::size_t>(n_max) + 1);
    for (int n = 0; n <= n_max; ++n) {
        auto b = scan.find(static_cast<std::size_t>(n));
        if (!b)
            throw NotBracketedError("eigenvalue not bracketed: level n = " + std::to_string(n) + " outside ["
                                    + std::to_string(cfg.e_min) + ", " + std::to_string(cfg.e_max) + "]");
        levels.push_back(refine(cfg, n, *b));
    }
    return levels;
}

Bracket bracket_transition(const ShootingProblem& p, const ShootingConfig& cfg, int n)
{
    return ShootingSolver(p).bracket(cfg, n);
}

EigenSolution solve_eigen(const ShootingProblem& p, const ShootingConfig& cfg, int n)
{
    return ShootingSolver(p).solve(cfg, n);
}

} // namespace qshoot
