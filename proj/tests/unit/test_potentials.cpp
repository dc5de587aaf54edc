#include "qshoot/errors.hpp"
#include "qshoot/potentials.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

using namespace qshoot;

TEST_CASE("Cornell and log channel by direct substitution")
{
    CHECK(PotentialSpec::cornell(0.0, 1.0)(2.0) == 2.0);
    CHECK(PotentialSpec::cornell(0.1, 0.5)(1.0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(eval_scalar(PotentialSpec::log_channel(2.0, 0.1), 1.0) == doctest::Approx(0.7419373447293773).epsilon(1e-15));
    CHECK(PotentialSpec::power_law(0.25, 2.0)(3.0) == doctest::Approx(2.25).epsilon(1e-15));
    CHECK(PotentialSpec::power_law(-1.0, -1.0)(4.0) == doctest::Approx(-0.25).epsilon(1e-15));
}

TEST_CASE("evaluation errors")
{
    const auto c = PotentialSpec::cornell(0.1, 0.5);
    CHECK_THROWS_AS(c(0.0), DomainError);
    CHECK_THROWS_AS(c(-1.0), DomainError);
    CHECK_THROWS_AS(PotentialSpec::log_channel(-1.0, 0.5)(1.0), DomainError);
    CHECK_NOTHROW(PotentialSpec::log_channel(-1.0, 0.5)(3.0));
    CHECK_THROWS_AS(PotentialSpec::cornell(0.1, INFINITY), ConfigError);
    CHECK_THROWS_AS(PotentialSpec::scaled(NAN, c), ConfigError);
    CHECK_THROWS_AS(PotentialSpec::tabulated({1.0}, {2.0}), ConfigError);
    CHECK_THROWS_AS(PotentialSpec::tabulated({1.0, 1.0}, {2.0, 3.0}), ConfigError);
    CHECK_THROWS_AS(PotentialSpec::tabulated({2.0, 1.0}, {2.0, 3.0}), ConfigError);
}

TEST_CASE("tabulated interpolation")
{
    const Tabulated t{{1.0, 3.0, 4.0}, {0.0, 4.0, -1.0}};
    CHECK(eval_tabulated(t, 2.0) == 2.0);
    CHECK(eval_tabulated(t, 1.0) == 0.0);
    CHECK(eval_tabulated(t, 3.0) == 4.0);
    CHECK(eval_tabulated(t, 4.0) == -1.0);
    CHECK(eval_tabulated(t, 3.5) == doctest::Approx(1.5));
    CHECK_THROWS_AS(eval_tabulated(t, 0.999), RangeError);
    CHECK_THROWS_AS(eval_tabulated(t, 4.001), RangeError);
}

TEST_CASE("dense Cornell table agrees with the closed form")
{
    const auto native = PotentialSpec::cornell(0.1, 0.5);
    const std::size_t knots = 100000;
    std::vector<double> r(knots), v(knots);
    for (std::size_t i = 0; i < knots; ++i) {
        r[i] = 0.01 + (30.0 - 0.01) * static_cast<double>(i) / static_cast<double>(knots - 1);
        v[i] = native(r[i]);
    }
    const auto table = PotentialSpec::tabulated(r, v);
    for (std::size_t i = 0; i < knots; i += 997)
        CHECK(table(r[i]) == v[i]);
    const double h = r[1] - r[0];
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.01, 30.0);
    double worst_outer = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double x = u(rng);
        const double err = std::abs(table(x) - native(x));
        // Linear interpolation error is at most h^2/8 max|V''| on the panel; V'' = 2a/r^3.
        const double left = r[static_cast<std::size_t>((x - r[0]) / h)];
        CHECK(err <= h * h / 8.0 * 0.2 / (left * left * left) * (1.0 + 1e-6) + 1e-14);
        if (x >= 0.2)
            worst_outer = std::max(worst_outer, err);
    }
    CHECK(worst_outer < 1e-6);
}

TEST_CASE("combinators are exact")
{
    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::uniform_real_distribution<double> radius(0.01, 50.0);
    for (int trial = 0; trial < 100; ++trial) {
        const auto p = PotentialSpec::cornell(u(rng), u(rng));
        const auto q = PotentialSpec::log_channel(3.0, std::abs(u(rng)));
        const double c = u(rng);
        const auto s = PotentialSpec::sum({p, q});
        const auto sc = PotentialSpec::scaled(c, p);
        const double r = radius(rng);
        CHECK(s(r) == p(r) + q(r));
        CHECK(sc(r) == c * p(r));
    }
}

TEST_CASE("batch evaluation matches pointwise evaluation exactly")
{
    const auto v = PotentialSpec::sum({PotentialSpec::cornell(0.1, 0.5),
                                       PotentialSpec::scaled(0.3, PotentialSpec::log_channel(1.0, 0.5)),
                                       PotentialSpec::custom([](double r) { return std::sin(r); })});
    std::vector<double> r;
    for (int i = 1; i <= 500; ++i)
        r.push_back(0.01 * i);
    std::vector<double> out(r.size());
    v.eval_batch(r, out);
    for (std::size_t i = 0; i < r.size(); ++i)
        CHECK(out[i] == v(r[i]));
}

TEST_CASE("tabulated CSV parsing")
{
    const auto t = parse_tabulated_csv("r,V\n# comment\n0.5,1.0\n1.0,2.5\r\n2.0,3.0\n");
    REQUIRE(t.r.size() == 3);
    CHECK(t.v[1] == 2.5);
    const auto headerless = parse_tabulated_csv("0.5, 1.0\n1.0, 2.0\n");
    CHECK(headerless.r.size() == 2);
    CHECK_THROWS_AS(parse_tabulated_csv("r,V\n1.0,2.0\n0.5,1.0\n"), ConfigError);
    CHECK_THROWS_AS(parse_tabulated_csv("r,V\n1.0\n2.0,3.0\n"), ConfigError);
    CHECK_THROWS_AS(parse_tabulated_csv("r,V\n1.0,x\n2.0,3.0\n"), ConfigError);

    const auto path = std::filesystem::temp_directory_path() / "qshoot_table_test.csv";
    {
        std::ofstream out(path);
        out << "r,V\n1,0\n3,4\n";
    }
    const auto loaded = load_tabulated_csv(path);
    CHECK(eval_tabulated(loaded, 2.0) == 2.0);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_tabulated_csv(path), ConfigError);
}

TEST_CASE("hybrid matrix potential")
{
    const auto vm = MatrixPotentialSpec::hybrid_log(1.0, 0.5, 2.0, 0.1, 1, 1.0);
    CHECK(vm.n_channels() == 2);
    const auto m = eval_matrix(vm, 1.0);
    CHECK(m[0] == doctest::Approx(4.0 + std::log(1.5)).epsilon(1e-15));
    CHECK(m[1] == doctest::Approx(-2.0 * std::sqrt(2.0)).epsilon(1e-15));
    CHECK(m[2] == m[1]);
    CHECK(m[3] == doctest::Approx(2.0 + std::log(2.1)).epsilon(1e-15));
    CHECK_THROWS_AS(eval_matrix(vm, 0.0), DomainError);

    const auto s = MatrixPotentialSpec::hybrid_log(0.7, 1.3, 0.2, 2.0, 0, 1.7);
    for (double r : {0.1, 1.0, 10.0}) {
        const auto d = eval_matrix(s, r);
        CHECK(d[1] == 0.0);
        CHECK(d[2] == 0.0);
    }
}

TEST_CASE("matrix potentials are symmetric")
{
    std::mt19937_64 rng(2718);
    std::uniform_real_distribution<double> radius(0.001, 40.0);
    std::uniform_int_distribution<int> ang(0, 6);
    for (int trial = 0; trial < 100; ++trial) {
        const auto vm = MatrixPotentialSpec::hybrid_log(1.0, 0.5, 2.0, 0.1, ang(rng), 1.0);
        const auto m = eval_matrix(vm, radius(rng));
        CHECK(m[1] == m[2]);
    }
    const auto dpc = MatrixPotentialSpec::diagonal_plus_coupling(
        {PotentialSpec::cornell(0.1, 0.5), PotentialSpec::power_law(1.0, 2.0), PotentialSpec::log_channel(1.0, 1.0)},
        [](double r, std::size_t i, std::size_t j) { return r * static_cast<double>(i + 2 * j); });
    for (int trial = 0; trial < 100; ++trial) {
        const double r = radius(rng);
        const auto m = eval_matrix(dpc, r);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                CHECK(m[i * 3 + j] == m[j * 3 + i]);
        CHECK(m[0 * 3 + 2] == r * 4.0);
    }
}
