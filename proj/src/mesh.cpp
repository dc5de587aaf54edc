#include "qshoot/mesh.hpp"

#include "qshoot/errors.hpp"

#include <cmath>
#include <string>

namespace qshoot {

RadialMesh::RadialMesh(double r_min, double r_max, std::size_t n_points)
    : r_min_(r_min), r_max_(r_max), n_points_(n_points), h_(0.0)
{
    if (!(std::isfinite(r_min) && std::isfinite(r_max)))
        throw ConfigError("mesh bounds must be finite");
    if (!(r_min > 0.0))
        throw ConfigError("mesh r_min must be positive, got " + std::to_string(r_min));
    if (!(r_max > r_min))
        throw ConfigError("mesh r_max must exceed r_min");
    if (n_points < 16)
        throw ConfigError("mesh needs at least 16 points, got " + std::to_string(n_points));
    h_ = (r_max - r_min) / static_cast<double>(n_points - 1);
    if (!(h_ > 0.0))
        throw ConfigError("mesh step underflows");
}

std::vector<double> RadialMesh::nodes() const
{
    std::vector<double> out(n_points_);
    for (std::size_t i = 0; i < n_points_; ++i)
        out[i] = r(i);
    return out;
}

RadialFunction::RadialFunction(RadialMesh m, std::vector<double> v, std::optional<std::size_t> div)
    : mesh(m), values(std::move(v)), diverged_at(div)
{
    if (values.size() != mesh.size())
        throw ConfigError("function has " + std::to_string(values.size()) + " samples for a mesh of "
                          + std::to_string(mesh.size()));
}

double simpson(std::span<const double> f, double h)
{
    const std::size_t n = f.size();
    if (n < 2)
        return 0.0;
    if (n == 2)
        return 0.5 * h * (f[0] + f[1]);

    // Simpson needs an even number of intervals; peel off the last one otherwise.
    const std::size_t last = (n % 2 == 1) ? n - 1 : n - 2;
    double odd = 0.0;
    double even = 0.0;
    for (std::size_t i = 1; i < last; i += 2)
        odd += f[i];
    for (std::size_t i = 2; i < last; i += 2)
        even += f[i];
    double sum = h / 3.0 * (f[0] + 4.0 * odd + 2.0 * even + f[last]);
    if (last != n - 1)
        sum += 0.5 * h * (f[n - 2] + f[n - 1]);
    return sum;
}

} // namespace qshoot
