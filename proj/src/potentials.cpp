#include "qshoot/potentials.hpp"

#include "qshoot/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace qshoot {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_positive_radius(double r)
{
    if (!(r > 0.0))
        throw DomainError("potential evaluated at non-positive radius r = " + std::to_string(r));
}

void require_finite(double x, const char* what)
{
    if (!std::isfinite(x))
        throw ConfigError(std::string(what) + " must be finite");
}

double log_channel(double a, double b, double r)
{
    const double arg = a + b * r;
    if (!(arg > 0.0))
        throw DomainError("ln(a + b r) undefined at r = " + std::to_string(r) + " (argument "
                          + std::to_string(arg) + ")");
    return std::log(arg);
}

double eval_node(const PotentialVariant& node, double r)
{
    return std::visit(
        overloaded{
            [r](const Cornell& c) { return c.a / r + c.k * r; },
            [r](const LogChannel& c) { return log_channel(c.a, c.b, r); },
            [r](const PowerLaw& p) { return p.coefficient * std::pow(r, p.exponent); },
            [r](const Tabulated& t) { return eval_tabulated(t, r); },
            [r](const Custom& c) { return c.f(r); },
            [r](const External& e) { return e.source->eval(r); },
            [r](const Sum& s) {
                double acc = 0.0;
                for (const auto& term : s.terms)
                    acc += term(r);
                return acc;
            },
            [r](const Scaled& s) { return s.factor * s.inner.front()(r); },
        },
        node);
}

} // namespace

PotentialSpec::PotentialSpec(PotentialVariant v)
    : node_(std::make_shared<const PotentialVariant>(std::move(v)))
{
}

PotentialSpec PotentialSpec::cornell(double a, double k)
{
    require_finite(a, "Cornell a");
    require_finite(k, "Cornell k");
    return PotentialSpec(Cornell{a, k});
}

PotentialSpec PotentialSpec::log_channel(double a, double b)
{
    require_finite(a, "log channel a");
    require_finite(b, "log channel b");
    return PotentialSpec(LogChannel{a, b});
}

PotentialSpec PotentialSpec::power_law(double coefficient, double exponent)
{
    require_finite(coefficient, "power-law coefficient");
    require_finite(exponent, "power-law exponent");
    return PotentialSpec(PowerLaw{coefficient, exponent});
}

PotentialSpec PotentialSpec::tabulated(std::vector<double> r, std::vector<double> v)
{
    if (r.size() != v.size())
        throw ConfigError("tabulated potential: abscissa and value counts differ");
    if (r.size() < 2)
        throw ConfigError("tabulated potential needs at least two points");
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (!std::isfinite(r[i]) || !std::isfinite(v[i]))
            throw ConfigError("tabulated potential: non-finite entry at row " + std::to_string(i));
        if (i > 0 && !(r[i] > r[i - 1]))
            throw ConfigError("tabulated potential: r must be strictly ascending (row " + std::to_string(i) + ")");
    }
    return PotentialSpec(Tabulated{std::move(r), std::move(v)});
}

PotentialSpec PotentialSpec::custom(ScalarField f, std::string label)
{
    if (!f)
        throw ConfigError("custom potential needs a callable");
    return PotentialSpec(Custom{std::move(f), std::move(label)});
}

PotentialSpec PotentialSpec::external(std::shared_ptr<const ExternalPotential> source)
{
    if (!source)
        throw ConfigError("external potential needs a source");
    return PotentialSpec(External{std::move(source)});
}

PotentialSpec PotentialSpec::sum(std::vector<PotentialSpec> terms)
{
    if (terms.empty())
        throw ConfigError("sum potential needs at least one term");
    return PotentialSpec(Sum{std::move(terms)});
}

PotentialSpec PotentialSpec::scaled(double factor, PotentialSpec inner)
{
    require_finite(factor, "scale factor");
    return PotentialSpec(Scaled{factor, {std::move(inner)}});
}

double PotentialSpec::operator()(double r) const
{
    require_positive_radius(r);
    return eval_node(*node_, r);
}

void PotentialSpec::eval_batch(std::span<const double> r, std::span<double> out) const
{
    if (r.size() != out.size())
        throw ConfigError("eval_batch: input and output sizes differ");
    for (double x : r)
        require_positive_radius(x);

    std::visit(overloaded{
                   [&](const External& e) { e.source->eval_batch(r, out); },
                   [&](const Sum& s) {
                       std::fill(out.begin(), out.end(), 0.0);
                       std::vector<double> part(out.size());
                       for (const auto& term : s.terms) {
                           term.eval_batch(r, part);
                           for (std::size_t i = 0; i < out.size(); ++i)
                               out[i] += part[i];
                       }
                   },
                   [&](const Scaled& s) {
                       s.inner.front().eval_batch(r, out);
                       for (double& x : out)
                           x = s.factor * x;
                   },
                   [&](const auto&) {
                       for (std::size_t i = 0; i < r.size(); ++i)
                           out[i] = eval_node(*node_, r[i]);
                   },
               },
               *node_);
}

ScalarField PotentialSpec::field() const
{
    return [self = *this](double r) { return self(r); };
}

std::string PotentialSpec::describe() const
{
    std::ostringstream os;
    std::visit(overloaded{
                   [&](const Cornell& c) { os << "cornell(a=" << c.a << ", k=" << c.k << ")"; },
                   [&](const LogChannel& c) { os << "ln(" << c.a << " + " << c.b << " r)"; },
                   [&](const PowerLaw& p) { os << p.coefficient << " r^" << p.exponent; },
                   [&](const Tabulated& t) { os << "tabulated(" << t.r.size() << " points)"; },
                   [&](const Custom& c) { os << c.label; },
                   [&](const External& e) { os << e.source->describe(); },
                   [&](const Sum& s) {
                       os << "sum(";
                       for (std::size_t i = 0; i < s.terms.size(); ++i)
                           os << (i ? ", " : "") << s.terms[i].describe();
                       os << ")";
                   },
                   [&](const Scaled& s) { os << s.factor << " * " << s.inner.front().describe(); },
               },
               *node_);
    return os.str();
}

double eval_scalar(const PotentialSpec& spec, double r)
{
    return spec(r);
}

double eval_tabulated(const Tabulated& table, double r)
{
    if (table.r.size() < 2 || table.r.size() != table.v.size())
        throw ConfigError("malformed table");
    if (!(r >= table.r.front() && r <= table.r.back()))
        throw RangeError("r = " + std::to_string(r) + " outside tabulated range ["
                         + std::to_string(table.r.front()) + ", " + std::to_string(table.r.back()) + "]");
    auto it = std::upper_bound(table.r.begin(), table.r.end(), r);
    std::size_t hi = static_cast<std::size_t>(it - table.r.begin());
    if (hi == table.r.size())
        return table.v.back();
    const std::size_t lo = hi - 1;
    if (r == table.r[lo])
        return table.v[lo];
    const double t = (r - table.r[lo]) / (table.r[hi] - table.r[lo]);
    return table.v[lo] + t * (table.v[hi] - table.v[lo]);
}

Tabulated parse_tabulated_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    std::vector<double> r;
    std::vector<double> v;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos || line[line.find_first_not_of(" \t")] == '#')
            continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ConfigError("tabulated CSV line " + std::to_string(line_no) + ": expected two columns");
        try {
            std::size_t used_r = 0;
            std::size_t used_v = 0;
            const std::string a = line.substr(0, comma);
            const std::string b = line.substr(comma + 1);
            const double x = std::stod(a, &used_r);
            const double y = std::stod(b, &used_v);
            if (a.find_first_not_of(" \t", used_r) != std::string::npos
                || b.find_first_not_of(" \t", used_v) != std::string::npos)
                throw std::invalid_argument("trailing characters");
            r.push_back(x);
            v.push_back(y);
        } catch (const std::logic_error&) {
            if (r.empty() && v.empty() && line_no == 1)
                continue;  // header
            throw ConfigError("tabulated CSV line " + std::to_string(line_no) + ": not numeric");
        }
    }
    // Validation (ascending, finite, >= 2 points) lives in PotentialSpec::tabulated.
    const auto spec = PotentialSpec::tabulated(r, v);
    return std::get<Tabulated>(spec.variant());
}

Tabulated load_tabulated_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open tabulated potential " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_tabulated_csv(buf.str());
}

HalfGridSamples sample_half_grid(const PotentialSpec& spec, const RadialMesh& mesh)
{
    std::vector<double> r(mesh.half_size());
    for (std::size_t k = 0; k < r.size(); ++k)
        r[k] = mesh.half_r(k);
    HalfGridSamples s{mesh, std::vector<double>(r.size())};
    spec.eval_batch(r, s.values);
    return s;
}

// ---------------------------------------------------------------------------------------------

MatrixPotentialSpec::MatrixPotentialSpec(MatrixPotentialVariant v)
    : node_(std::make_shared<const MatrixPotentialVariant>(std::move(v)))
{
}

MatrixPotentialSpec MatrixPotentialSpec::hybrid_log(double a0, double b0, double a1, double b1, int l, double m)
{
    for (double x : {a0, b0, a1, b1})
        require_finite(x, "hybrid potential parameter");
    if (l < 0)
        throw ConfigError("hybrid potential: l must be non-negative");
    if (!(m > 0.0) || !std::isfinite(m))
        throw ConfigError("hybrid potential: mass must be positive");
    return MatrixPotentialSpec(HybridLog{a0, b0, a1, b1, l, m});
}

MatrixPotentialSpec MatrixPotentialSpec::diagonal_plus_coupling(
    std::vector<PotentialSpec> diagonal, std::function<double(double, std::size_t, std::size_t)> coupling)
{
    if (diagonal.empty())
        throw ConfigError("matrix potential needs at least one channel");
    return MatrixPotentialSpec(DiagonalPlusCoupling{std::move(diagonal), std::move(coupling)});
}

std::size_t MatrixPotentialSpec::n_channels() const
{
    return std::visit(overloaded{
                          [](const HybridLog&) -> std::size_t { return 2; },
                          [](const DiagonalPlusCoupling& d) { return d.diagonal.size(); },
                      },
                      *node_);
}

void MatrixPotentialSpec::eval(double r, std::span<double> out) const
{
    require_positive_radius(r);
    const std::size_t n = n_channels();
    if (out.size() != n * n)
        throw ConfigError("matrix potential output has the wrong size");
    std::visit(overloaded{
                   [&](const HybridLog& h) {
                       const double big_l = static_cast<double>(h.l) * static_cast<double>(h.l + 1);
                       const double c = 1.0 / (h.m * r * r);
                       const double off = -2.0 * std::sqrt(big_l) * c;
                       out[0] = (big_l + 2.0) * c + log_channel(h.a0, h.b0, r);
                       out[1] = off;
                       out[2] = off;
                       out[3] = big_l * c + log_channel(h.a1, h.b1, r);
                   },
                   [&](const DiagonalPlusCoupling& d) {
                       for (std::size_t i = 0; i < n; ++i) {
                           out[i * n + i] = d.diagonal[i](r);
                           for (std::size_t j = i + 1; j < n; ++j) {
                               const double c = d.coupling ? d.coupling(r, i, j) : 0.0;
                               out[i * n + j] = c;
                               out[j * n + i] = c;
                           }
                       }
                   },
               },
               *node_);
}

std::vector<double> MatrixPotentialSpec::eval(double r) const
{
    const std::size_t n = n_channels();
    std::vector<double> out(n * n);
    eval(r, out);
    return out;
}

MatrixField MatrixPotentialSpec::field() const
{
    return [self = *this](double r, std::span<double> out) { self.eval(r, out); };
}

std::vector<double> eval_matrix(const MatrixPotentialSpec& spec, double r)
{
    return spec.eval(r);
}

} // namespace qshoot
