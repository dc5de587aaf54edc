#include "qshoot/coupled.hpp"
#include "qshoot/errors.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

using namespace qshoot;

namespace {

CoupledProblem hybrid_problem(double r_max = 30.0, std::size_t points = 20001)
{
    return {MatrixPotentialSpec::hybrid_log(1.0, 0.5, 2.0, 0.1, 1, 1.0), 1, 1.0, RadialMesh(1e-5, r_max, points)};
}

double joint_norm(const CoupledSolution& s)
{
    double total = 0.0;
    for (const auto& u : s.components)
        total += norm_squared(u);
    return total;
}

double unit_error(const std::vector<double>& c)
{
    double s = 0.0;
    for (double x : c)
        s += x * x;
    return std::abs(std::sqrt(s) - 1.0);
}

} // namespace

TEST_CASE("problem validation")
{
    auto p = hybrid_problem();
    p.mass = -1.0;
    CHECK_THROWS_AS(CoupledSolver{p}, ConfigError);
    p = hybrid_problem();
    p.l = -2;
    CHECK_THROWS_AS(CoupledSolver{p}, ConfigError);
}

TEST_CASE("hybrid two-channel levels")
{
    const CoupledSolver solver(hybrid_problem());
    const ShootingConfig cfg = default_config(1.0);
    const std::pair<int, double> expected[] = {{0, 1.01727}, {1, 1.18789}};
    for (const auto& [n, e] : expected) {
        const auto s = solver.solve(cfg, n);
        CHECK(std::abs(s.energy - e) < 5e-4);
        CHECK(s.n == n);
        CHECK(solver.det_nodes_at(s.energy) == static_cast<std::size_t>(n));
        CHECK(std::abs(joint_norm(s) - 1.0) < 1e-8);
        CHECK(unit_error(s.mixing) < 1e-12);
        REQUIRE(s.components.size() == 2);
        for (const auto& u : s.components) {
            for (std::size_t i = 0; i <= s.truncation_index; ++i)
                REQUIRE(std::isfinite(u[i]));
            for (std::size_t i = s.truncation_index + 1; i < u.size(); ++i)
                REQUIRE(u[i] == 0.0);
        }
        CHECK(s.tail_residual < 1e-3);
    }
}

TEST_CASE("hybrid levels do not depend on the box size")
{
    const ShootingConfig cfg = default_config(1.0);
    const double e30 = CoupledSolver(hybrid_problem()).solve(cfg, 1).energy;
    const double e60 = CoupledSolver(hybrid_problem(60.0, 40001)).solve(cfg, 1).energy;
    CHECK(std::abs(e30 - e60) < 1e-6);
}

TEST_CASE("the det-node count is a unit step function across both levels")
{
    const CoupledSolver solver(hybrid_problem());
    const double e0 = 1.01727;
    const double e1 = 1.18789;
    std::vector<std::size_t> counts;
    for (int i = 0; i < 100; ++i)
        counts.push_back(solver.det_nodes_at(0.95 + 0.3 * i / 99.0));
    CHECK(counts.front() == 0);
    for (std::size_t i = 1; i < counts.size(); ++i) {
        CHECK(counts[i] >= counts[i - 1]);
        CHECK(counts[i] - counts[i - 1] <= 1);
    }
    CHECK(counts.back() == 2);
    CHECK(solver.det_nodes_at(e0 - 1e-3) == 0);
    CHECK(solver.det_nodes_at(e0 + 1e-3) == 1);
    CHECK(solver.det_nodes_at(e1 - 1e-3) == 1);
    CHECK(solver.det_nodes_at(e1 + 1e-3) == 2);
}

TEST_CASE("a single channel reproduces the scalar solver")
{
    const ShootingConfig cfg = default_config(1.0);
    const auto cornell = PotentialSpec::cornell(0.1, 0.5);
    const RadialMesh mesh = default_mesh(cornell, 1.0);
    for (int n : {0, 1, 3}) {
        const auto scalar = solve_eigen({cornell, 0, 1.0, mesh}, cfg, n);
        const auto coupled = solve_coupled({MatrixPotentialSpec::diagonal_plus_coupling({cornell}), 0, 1.0, mesh}, cfg, n);
        CHECK(std::abs(coupled.energy - scalar.energy) <= cfg.bisect_tol);
        CHECK(coupled.mixing == std::vector<double>{1.0});
    }
    // l = 1 with the centrifugal term folded into the channel.
    const auto with_barrier = PotentialSpec::sum({cornell, PotentialSpec::power_law(2.0, -2.0)});
    const auto scalar = solve_eigen({cornell, 1, 1.0, mesh}, cfg, 0);
    const auto coupled = solve_coupled({MatrixPotentialSpec::diagonal_plus_coupling({with_barrier}), 1, 1.0, mesh}, cfg, 0);
    CHECK(std::abs(coupled.energy - scalar.energy) <= cfg.bisect_tol);
}

TEST_CASE("decoupled channels give the merged single-channel spectrum")
{
    const ShootingConfig cfg = default_config(1.0);
    const RadialMesh mesh(1e-5, 20.0, 20001);
    const auto v0 = PotentialSpec::power_law(0.25, 2.0);
    const auto v1 = PotentialSpec::sum({v0, PotentialSpec::power_law(0.7, 0.0)});
    const ShootingSolver s0({v0, 0, 1.0, mesh});
    const ShootingSolver s1({v1, 0, 1.0, mesh});
    std::vector<double> merged;
    for (const auto& level : s0.solve_levels(cfg, 2))
        merged.push_back(level.energy);
    for (const auto& level : s1.solve_levels(cfg, 2))
        merged.push_back(level.energy);
    std::sort(merged.begin(), merged.end());

    const CoupledSolver coupled({MatrixPotentialSpec::diagonal_plus_coupling({v0, v1}), 0, 1.0, mesh});
    for (int n = 0; n < 3; ++n) {
        const auto s = coupled.solve(cfg, n);
        CHECK(std::abs(s.energy - merged[n]) < 1e-6);
        CHECK(std::abs(joint_norm(s) - 1.0) < 1e-8);
    }
    // Ground state lives in channel 0 alone, the next one in channel 1 alone.
    const auto g = coupled.solve(cfg, 0);
    CHECK(std::abs(g.mixing[0] - 1.0) < 1e-6);
    CHECK(std::abs(norm_squared(g.components[1])) < 1e-10);
    const auto x = coupled.solve(cfg, 1);
    CHECK(std::abs(x.mixing[1] - 1.0) < 1e-6);
    CHECK(std::abs(norm_squared(x.components[0])) < 1e-10);
}

TEST_CASE("extract_combination on a singular matrix returns a null direction")
{
    const RadialMesh mesh(0.1, 1.6, 16);
    ChannelTrajectory t{mesh, 2, std::vector<double>(4 * mesh.size(), 0.0), std::nullopt};
    // Rank one: rows (1, 2) and (2, 4).
    t.data[4 * 5 + 0] = 1.0;
    t.data[4 * 5 + 1] = 2.0;
    t.data[4 * 5 + 2] = 2.0;
    t.data[4 * 5 + 3] = 4.0;
    const auto c = extract_combination(t, 5);
    CHECK(unit_error(c) < 1e-15);
    CHECK(std::abs(1.0 * c[0] + 2.0 * c[1]) < 1e-15);
    CHECK(std::abs(c[0]) >= std::abs(c[1]));
    CHECK(c[0] > 0.0);
    CHECK_THROWS_AS(extract_combination(t, 4), DegenerateError);
}

TEST_CASE("extract_combination picks the channel sitting at its own level")
{
    const ShootingConfig cfg = default_config(1.0);
    const RadialMesh mesh(1e-5, 20.0, 20001);
    const auto v0 = PotentialSpec::power_law(0.25, 2.0);
    const auto v1 = PotentialSpec::sum({v0, PotentialSpec::power_law(5.0, 0.0)});
    const auto ground = solve_eigen({v0, 0, 1.0, mesh}, cfg, 0);
    const auto vm = MatrixPotentialSpec::diagonal_plus_coupling({v0, v1});
    const std::vector<double> u0{mesh.r_min(), 0.0, 0.0, mesh.r_min()};
    const std::vector<double> du0{1.0, 0.0, 0.0, 1.0};
    const auto t = propagate_coupled(vm.field(), 2, ground.energy, 1.0, mesh, u0, du0);
    const auto c = extract_combination(t, ground.truncation_index);
    CHECK(std::abs(c[0] - 1.0) < 1e-6);
    CHECK(std::abs(c[1]) < 1e-6);
}

TEST_CASE("extract_combination is unit norm and minimizes |U c| on random matrices")
{
    std::mt19937_64 rng(8080);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (std::size_t n : {2u, 3u, 4u}) {
        const RadialMesh mesh(0.1, 1.6, 16);
        for (int trial = 0; trial < 100; ++trial) {
            ChannelTrajectory t{mesh, n, std::vector<double>(n * n * mesh.size()), std::nullopt};
            for (double& x : t.data)
                x = u(rng);
            const auto c = extract_combination(t, 3);
            CHECK(unit_error(c) < 1e-12);
            double big = 0.0;
            for (double x : c)
                big = std::abs(x) > std::abs(big) ? x : big;
            CHECK(big > 0.0);
            const auto m = t.matrix(3);
            auto residual = [&](const std::vector<double>& v) {
                double s = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    double row = 0.0;
                    for (std::size_t j = 0; j < n; ++j)
                        row += m[i * n + j] * v[j];
                    s += row * row;
                }
                return std::sqrt(s);
            };
            const double best = residual(c);
            for (int probe = 0; probe < 20; ++probe) {
                std::vector<double> v(n);
                double norm = 0.0;
                for (double& x : v) {
                    x = u(rng);
                    norm += x * x;
                }
                for (double& x : v)
                    x /= std::sqrt(norm);
                CHECK(best <= residual(v) + 1e-12);
            }
        }
    }
}
