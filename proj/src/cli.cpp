#include "qshoot/cli.hpp"

#include "qshoot/coupled.hpp"
#include "qshoot/errors.hpp"
#include "qshoot/ini.hpp"
#include "qshoot/plugin.hpp"
#include "qshoot/shooting.hpp"
#include "qshoot/spectrum.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace qshoot::cli {

namespace {

namespace fs = std::filesystem;

std::string fmt(double v, int digits = 12)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

double parse_double(std::string_view token, const std::string& what)
{
    double v = 0.0;
    token = trim(token);
    const auto* end = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(token.data(), end, v);
    if (token.empty() || ec != std::errc{} || ptr != end || !std::isfinite(v))
        throw ConfigError(what + ": '" + std::string(token) + "' is not a finite number");
    return v;
}

long long parse_integer(std::string_view token, const std::string& what)
{
    long long v = 0;
    token = trim(token);
    const auto* end = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(token.data(), end, v);
    if (token.empty() || ec != std::errc{} || ptr != end)
        throw ConfigError(what + ": '" + std::string(token) + "' is not an integer");
    return v;
}

// ---------------------------------------------------------------------------------------------
// Run configuration: the manifest grammar with a fixed set of sections.

const std::map<std::string, std::set<std::string>, std::less<>>& known_keys()
{
    static const std::map<std::string, std::set<std::string>, std::less<>> keys = {
        {"problem", {"mass", "l"}},
        {"mesh", {"r_min", "r_max", "points"}},
        {"solver", {"e_min", "e_max", "scan_step", "bisect_tol", "max_bisect"}},
        {"output", {"csv", "svg"}},
        {"spectrum", {"basis_max", "element_factor"}},
        {"fit", {"target0", "target1", "target2", "guess", "tol", "max_iterations"}},
    };
    return keys;
}

const std::set<std::string>& potential_keys()
{
    static const std::set<std::string> keys = {"type", "a", "k", "b", "coefficient", "exponent", "file", "library",
                                               "manifest", "function", "terms", "scale", "a0", "b0", "a1", "b1"};
    return keys;
}

bool is_potential_section(std::string_view name)
{
    for (std::string_view root : {"potential", "v_1m2", "v_1m"})
        if (name == root || (name.starts_with(root) && name.size() > root.size() && name[root.size()] == '.'))
            return true;
    return false;
}

class RunConfig {
public:
    RunConfig() = default;

    static RunConfig load(const fs::path& path)
    {
        RunConfig c;
        c.doc_ = parse_ini(read_text_file(path));
        c.dir_ = path.parent_path();
        std::set<std::string> seen;
        for (const auto& s : c.doc_.sections) {
            if (!seen.insert(s.name).second)
                throw ConfigError("line " + std::to_string(s.line) + ": section [" + s.name + "] repeated");
            const std::set<std::string>* allowed = nullptr;
            if (is_potential_section(s.name))
                allowed = &potential_keys();
            else if (auto it = known_keys().find(s.name); it != known_keys().end())
                allowed = &it->second;
            else
                throw ConfigError("line " + std::to_string(s.line) + ": unknown section [" + s.name + "]");
            std::set<std::string> keys;
            for (const auto& e : s.entries) {
                if (!allowed->count(e.key))
                    throw ConfigError("line " + std::to_string(e.line) + ": unknown key '" + e.key + "' in [" + s.name + "]");
                if (!keys.insert(e.key).second)
                    throw ConfigError("line " + std::to_string(e.line) + ": key '" + e.key + "' repeated");
            }
        }
        return c;
    }

    const IniSection* section(std::string_view name) const { return doc_.find(name); }

    const IniEntry* entry(std::string_view section, std::string_view key) const
    {
        const auto* s = doc_.find(section);
        return s ? s->find(key) : nullptr;
    }

    std::optional<double> number(std::string_view section, std::string_view key) const
    {
        const auto* e = entry(section, key);
        if (!e)
            return std::nullopt;
        return parse_double(e->value, where(section, *e));
    }

    std::optional<long long> integer(std::string_view section, std::string_view key) const
    {
        const auto* e = entry(section, key);
        if (!e)
            return std::nullopt;
        return parse_integer(e->value, where(section, *e));
    }

    double required(std::string_view section, std::string_view key) const
    {
        const auto v = number(section, key);
        if (!v)
            throw ConfigError("[" + std::string(section) + "] needs '" + std::string(key) + "'");
        return *v;
    }

    fs::path resolve(const std::string& p) const
    {
        const fs::path path(p);
        return path.is_absolute() || dir_.empty() ? path : dir_ / path;
    }

    static std::string where(std::string_view section, const IniEntry& e)
    {
        return "line " + std::to_string(e.line) + " [" + std::string(section) + "] " + e.key;
    }

private:
    IniDocument doc_;
    fs::path dir_;
};

struct PluginFlags {
    std::string library;
    std::string manifest;
};

PotentialSpec build_potential(const RunConfig& c, const std::string& name, const PluginFlags& flags)
{
    const auto* s = c.section(name);
    if (!s)
        throw ConfigError("missing section [" + name + "]");
    const auto* type_entry = s->find("type");
    if (!type_entry)
        throw ConfigError("[" + name + "] needs 'type'");
    const std::string& type = type_entry->value;

    PotentialSpec v = [&]() -> PotentialSpec {
        if (type == "cornell")
            return PotentialSpec::cornell(c.required(name, "a"), c.required(name, "k"));
        if (type == "log")
            return PotentialSpec::log_channel(c.required(name, "a"), c.required(name, "b"));
        if (type == "power")
            return PotentialSpec::power_law(c.required(name, "coefficient"), c.required(name, "exponent"));
        if (type == "tabulated") {
            const auto* file = s->find("file");
            if (!file)
                throw ConfigError("[" + name + "] needs 'file'");
            auto table = load_tabulated_csv(c.resolve(file->value));
            return PotentialSpec::tabulated(std::move(table.r), std::move(table.v));
        }
        if (type == "plugin") {
            const auto* lib = s->find("library");
            const auto* man = s->find("manifest");
            const auto* fn = s->find("function");
            if (!fn)
                throw ConfigError("[" + name + "] needs 'function'");
            const fs::path library = !flags.library.empty() ? fs::path(flags.library)
                                     : lib                  ? c.resolve(lib->value)
                                                            : throw ConfigError("[" + name + "] needs 'library' or --plugin");
            const fs::path manifest = !flags.manifest.empty() ? fs::path(flags.manifest)
                                      : man                   ? c.resolve(man->value)
                                                              : throw ConfigError("[" + name + "] needs 'manifest' or --manifest");
            return potential_from_plugin(load_plugin(library, manifest), fn->value);
        }
        if (type == "sum") {
            const auto* terms = s->find("terms");
            if (!terms)
                throw ConfigError("[" + name + "] needs 'terms'");
            std::vector<PotentialSpec> parts;
            for (const auto& t : split_list(terms->value))
                parts.push_back(build_potential(c, name + "." + t, flags));
            return PotentialSpec::sum(std::move(parts));
        }
        throw ConfigError("[" + name + "] unknown potential type '" + type + "'");
    }();
    if (const auto scale = c.number(name, "scale"))
        v = PotentialSpec::scaled(*scale, v);
    return v;
}

double config_mass(const RunConfig& c)
{
    const double m = c.number("problem", "mass").value_or(1.0);
    if (!(m > 0.0))
        throw ConfigError("[problem] mass must be positive");
    return m;
}

int config_l(const RunConfig& c, std::optional<int> flag)
{
    if (flag)
        return *flag;
    return static_cast<int>(c.integer("problem", "l").value_or(0));
}

RadialMesh config_mesh(const RunConfig& c, const RadialMesh& fallback)
{
    const auto points = c.integer("mesh", "points").value_or(static_cast<long long>(fallback.size()));
    if (points < 16)
        throw ConfigError("[mesh] points must be at least 16");
    return RadialMesh(c.number("mesh", "r_min").value_or(fallback.r_min()),
                      c.number("mesh", "r_max").value_or(fallback.r_max()), static_cast<std::size_t>(points));
}

unsigned thread_cap()
{
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("QSHOOT_THREADS"); env && *env) {
        const long long cap = parse_integer(env, "QSHOOT_THREADS");
        if (cap < 1)
            throw ConfigError("QSHOOT_THREADS must be a positive integer");
        threads = std::min<unsigned>(threads, static_cast<unsigned>(std::min<long long>(cap, 1024)));
    }
    return threads;
}

ShootingConfig config_solver(const RunConfig& c, double mass)
{
    ShootingConfig cfg = default_config(mass);
    cfg.e_min = c.number("solver", "e_min").value_or(cfg.e_min);
    cfg.e_max = c.number("solver", "e_max").value_or(cfg.e_max);
    cfg.scan_step = c.number("solver", "scan_step").value_or(cfg.scan_step);
    cfg.bisect_tol = c.number("solver", "bisect_tol").value_or(cfg.bisect_tol);
    cfg.max_bisect = static_cast<int>(c.integer("solver", "max_bisect").value_or(cfg.max_bisect));
    cfg.threads = thread_cap();
    cfg.validate();
    return cfg;
}

MatrixPotentialSpec build_matrix_potential(const RunConfig& c, int l, double mass)
{
    const auto* type = c.entry("potential", "type");
    if (!type || type->value != "hybrid")
        throw ConfigError("coupled runs need [potential] type = hybrid");
    return MatrixPotentialSpec::hybrid_log(c.required("potential", "a0"), c.required("potential", "b0"),
                                           c.required("potential", "a1"), c.required("potential", "b1"), l, mass);
}

// ---------------------------------------------------------------------------------------------

struct Outputs {
    std::string csv;
    bool svg = false;
};

void emit(const RunConfig& c, const Outputs& o, const RadialMesh& mesh, const std::vector<std::string>& names,
          const std::vector<const std::vector<double>*>& columns, std::ostream& out)
{
    fs::path csv;
    if (!o.csv.empty())
        csv = o.csv;
    else if (const auto* e = c.entry("output", "csv"))
        csv = c.resolve(e->value);
    fs::path svg;
    if (const auto* e = c.entry("output", "svg"))
        svg = c.resolve(e->value);
    if (o.svg) {
        if (csv.empty())
            throw ConfigError("--svg needs --out (the plot is written next to the CSV)");
        svg = fs::path(csv).replace_extension(".svg");
    }
    if (!csv.empty()) {
        write_csv(csv, mesh, names, columns);
        out << "csv = " << csv.string() << '\n';
    }
    if (!svg.empty()) {
        write_svg(svg, mesh, names, columns);
        out << "svg = " << svg.string() << '\n';
    }
}

double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct Common {
    std::string config;
    PluginFlags plugin;
    Outputs outputs;
    int n = 0;
    std::optional<int> l;
    std::optional<int> basis_max;
};

RunConfig load_config(const Common& o)
{
    if (o.config.empty())
        throw ConfigError("--config is required");
    return RunConfig::load(o.config);
}

int cmd_solve(const Common& o, std::ostream& out)
{
    const RunConfig c = load_config(o);
    const double mass = config_mass(c);
    const auto v = build_potential(c, "potential", o.plugin);
    const ShootingProblem problem{v, config_l(c, o.l), mass, config_mesh(c, default_mesh(v, mass))};
    const auto start = std::chrono::steady_clock::now();
    const auto s = ShootingSolver(problem).solve(config_solver(c, mass), o.n);
    const double elapsed = seconds_since(start);
    std::ostringstream files;
    emit(c, o.outputs, problem.mesh, {"y"}, {&s.wavefunction.values}, files);
    out << "potential = " << v.describe() << '\n'
        << "n = " << s.n << '\n'
        << "l = " << s.l << '\n'
        << "mass = " << fmt(mass) << '\n'
        << "energy = " << fmt(s.energy) << '\n'
        << "nodes = " << count_nodes(s.wavefunction, s.truncation_index) << '\n'
        << "truncation_r = " << fmt(problem.mesh.r(s.truncation_index)) << '\n'
        << "tail_residual = " << fmt(s.tail_residual, 6) << '\n'
        << "iterations = " << s.bisections << '\n'
        << "seconds = " << fmt(elapsed, 4) << '\n'
        << files.str();
    return ok;
}

int cmd_coupled(const Common& o, std::ostream& out)
{
    const RunConfig c = load_config(o);
    const double mass = config_mass(c);
    const int l = config_l(c, o.l);
    const CoupledProblem problem{build_matrix_potential(c, l, mass), l, mass,
                                 config_mesh(c, RadialMesh(1e-5, 30.0, 20001))};
    const auto start = std::chrono::steady_clock::now();
    const auto s = CoupledSolver(problem).solve(config_solver(c, mass), o.n);
    const double elapsed = seconds_since(start);
    std::vector<std::string> names;
    std::vector<const std::vector<double>*> columns;
    for (std::size_t j = 0; j < s.components.size(); ++j) {
        names.push_back("u" + std::to_string(j + 1));
        columns.push_back(&s.components[j].values);
    }
    std::ostringstream files;
    emit(c, o.outputs, problem.mesh, names, columns, files);
    std::string mixing;
    for (std::size_t j = 0; j < s.mixing.size(); ++j)
        mixing += (j ? ", " : "") + fmt(s.mixing[j]);
    out << "n = " << s.n << '\n'
        << "l = " << s.l << '\n'
        << "mass = " << fmt(mass) << '\n'
        << "energy = " << fmt(s.energy) << '\n'
        << "channels = " << s.components.size() << '\n'
        << "mixing = " << mixing << '\n'
        << "truncation_r = " << fmt(problem.mesh.r(s.truncation_index)) << '\n'
        << "tail_residual = " << fmt(s.tail_residual, 6) << '\n'
        << "iterations = " << s.bisections << '\n'
        << "seconds = " << fmt(elapsed, 4) << '\n'
        << files.str();
    return ok;
}

std::optional<ScalarField> correction(const RunConfig& c, const std::string& name, const PluginFlags& flags)
{
    if (!c.section(name))
        return std::nullopt;
    return build_potential(c, name, flags).field();
}

void apply_spectrum_settings(const RunConfig& c, SpectrumModel& model, std::optional<int> basis_max,
                             const PluginFlags& flags)
{
    if (auto w = correction(c, "v_1m", flags))
        model.v_1m = *w;
    if (auto w = correction(c, "v_1m2", flags))
        model.v_1m2 = *w;
    model.basis_max = static_cast<int>(c.integer("spectrum", "basis_max").value_or(model.basis_max));
    if (basis_max)
        model.basis_max = *basis_max;
    model.element_factor = c.number("spectrum", "element_factor").value_or(1.0);
}

int cmd_spectrum(const Common& o, std::ostream& out)
{
    const RunConfig c = load_config(o);
    const double mass = config_mass(c);
    const auto v = build_potential(c, "potential", o.plugin);
    SpectrumModel model{mass, v, {}, {}, config_l(c, o.l), 20, config_solver(c, mass),
                        config_mesh(c, default_mesh(v, mass))};
    apply_spectrum_settings(c, model, o.basis_max, o.plugin);
    const auto start = std::chrono::steady_clock::now();
    const auto b = SpectrumSolver(model).mass_at_order(o.n);
    out << "n = " << o.n << '\n'
        << "l = " << model.l << '\n'
        << "basis_max = " << model.basis_max << '\n'
        << "e0 = " << fmt(b.e0) << '\n'
        << "lo = " << fmt(b.lo) << '\n'
        << "nlo = " << fmt(b.nlo) << '\n'
        << "nnlo_diag = " << fmt(b.nnlo_diag) << '\n'
        << "nnlo_sum = " << fmt(b.nnlo_sum) << '\n'
        << "sum_tail = " << fmt(b.sum_tail, 6) << '\n'
        << "mass_total = " << fmt(b.total) << '\n'
        << "seconds = " << fmt(seconds_since(start), 4) << '\n';
    return ok;
}

int cmd_fit(const Common& o, std::ostream& out)
{
    const RunConfig c = load_config(o);
    std::array<FitTarget, 3> targets{};
    for (int i = 0; i < 3; ++i) {
        const std::string key = "target" + std::to_string(i);
        const auto* e = c.entry("fit", key);
        if (!e)
            throw ConfigError("[fit] needs '" + key + "' = n, l, mass");
        const auto parts = split_list(e->value);
        if (parts.size() != 3)
            throw ConfigError(RunConfig::where("fit", *e) + ": expected n, l, mass");
        targets[static_cast<std::size_t>(i)] = {static_cast<int>(parse_integer(parts[0], key)),
                                                static_cast<int>(parse_integer(parts[1], key)),
                                                parse_double(parts[2], key)};
    }
    const auto* g = c.entry("fit", "guess");
    if (!g)
        throw ConfigError("[fit] needs 'guess' = a, k, m");
    const auto parts = split_list(g->value);
    if (parts.size() != 3)
        throw ConfigError(RunConfig::where("fit", *g) + ": expected a, k, m");
    const std::array<double, 3> guess{parse_double(parts[0], "guess"), parse_double(parts[1], "guess"),
                                      parse_double(parts[2], "guess")};
    if (!(guess[2] > 0.0))
        throw ConfigError("[fit] guess mass must be positive");
    const double tol = c.number("fit", "tol").value_or(1e-8);

    FitOptions options;
    options.max_iterations = static_cast<int>(c.integer("fit", "max_iterations").value_or(options.max_iterations));
    const RadialMesh mesh = config_mesh(c, default_mesh(PotentialSpec::cornell(guess[0], guess[1]), guess[2]));
    // Corrections and solver settings are read once; only (a, k, m) vary.
    SpectrumModel settings = cornell_model(guess[0], guess[1], guess[2], 0);
    apply_spectrum_settings(c, settings, o.basis_max, o.plugin);
    const bool fixed_solver = c.section("solver") != nullptr;
    const ShootingConfig solver = fixed_solver ? config_solver(c, guess[2]) : ShootingConfig{};
    const unsigned threads = thread_cap();
    options.model = [&](double a, double k, double m, int l) {
        SpectrumModel model = cornell_model(a, k, m, l);
        model.mesh = mesh;
        model.v_1m = settings.v_1m;
        model.v_1m2 = settings.v_1m2;
        model.basis_max = settings.basis_max;
        model.element_factor = settings.element_factor;
        if (fixed_solver)
            model.config = solver;
        model.config.threads = threads;
        return model;
    };
    const auto start = std::chrono::steady_clock::now();
    const auto r = fit_parameters(targets, guess, tol, options);
    out << "a = " << fmt(r.a) << '\n'
        << "k = " << fmt(r.k) << '\n'
        << "m = " << fmt(r.m) << '\n'
        << "iterations = " << r.iterations << '\n';
    for (std::size_t i = 0; i < 3; ++i)
        out << "residual" << i << " = " << fmt(r.residuals[i], 6) << '\n';
    out << "seconds = " << fmt(seconds_since(start), 4) << '\n';
    return ok;
}

int cmd_scan(const Common& o, std::ostream& out)
{
    const RunConfig c = load_config(o);
    const double mass = config_mass(c);
    const int l = config_l(c, o.l);
    const ShootingConfig cfg = config_solver(c, mass);
    const auto* type = c.entry("potential", "type");
    std::function<std::size_t(double)> count;
    std::unique_ptr<ShootingSolver> scalar;
    std::unique_ptr<CoupledSolver> coupled;
    if (type && type->value == "hybrid") {
        coupled = std::make_unique<CoupledSolver>(CoupledProblem{build_matrix_potential(c, l, mass), l, mass,
                                                                 config_mesh(c, RadialMesh(1e-5, 30.0, 20001))});
        count = [&](double e) { return coupled->det_nodes_at(e); };
    } else {
        const auto v = build_potential(c, "potential", o.plugin);
        scalar = std::make_unique<ShootingSolver>(ShootingProblem{v, l, mass, config_mesh(c, default_mesh(v, mass))});
        count = [&](double e) { return scalar->nodes_at(e); };
    }
    out << "energy,nodes\n";
    const auto steps = static_cast<std::size_t>(std::ceil((cfg.e_max - cfg.e_min) / cfg.scan_step - 1e-12));
    for (std::size_t j = 0; j <= steps; ++j) {
        const double e = j == steps ? cfg.e_max : cfg.e_min + static_cast<double>(j) * cfg.scan_step;
        out << fmt(e) << ',' << count(e) << '\n';
    }
    return ok;
}

NumericArray parse_array(const std::string& text, ScalarType type, const std::string& what)
{
    const auto items = split_list(text);
    switch (type) {
    case ScalarType::Int32: {
        std::vector<std::int32_t> v;
        for (const auto& s : items) {
            const long long x = parse_integer(s, what);
            if (x < INT32_MIN || x > INT32_MAX)
                throw ConfigError(what + ": " + s + " does not fit in INT32");
            v.push_back(static_cast<std::int32_t>(x));
        }
        return v;
    }
    case ScalarType::Float32: {
        std::vector<float> v;
        for (const auto& s : items)
            v.push_back(static_cast<float>(parse_double(s, what)));
        return v;
    }
    default: {
        std::vector<double> v;
        for (const auto& s : items)
            v.push_back(parse_double(s, what));
        return v;
    }
    }
}

std::vector<std::size_t> parse_lengths(const std::string& text)
{
    std::vector<std::size_t> out;
    for (const auto& s : split_list(text)) {
        const long long v = parse_integer(s, "length");
        if (v < 1)
            throw ConfigError("lengths must be positive");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

struct CallOptions {
    std::string function;
    std::vector<std::string> inputs;
    std::string in_lengths;
    std::string out_lengths;
};

int cmd_call(const Common& o, const CallOptions& call, std::ostream& out)
{
    if (o.plugin.library.empty() || o.plugin.manifest.empty())
        throw ConfigError("call needs --plugin and --manifest");
    const auto plugin = load_plugin(o.plugin.library, fs::path(o.plugin.manifest));
    auto shape = plugin->shape(call.function);
    if (!call.in_lengths.empty() || !call.out_lengths.empty())
        shape = plugin->override_lengths(call.function,
                                         call.in_lengths.empty() ? shape.in_lengths : parse_lengths(call.in_lengths),
                                         call.out_lengths.empty() ? shape.out_lengths : parse_lengths(call.out_lengths));
    std::vector<NumericArray> inputs;
    for (std::size_t i = 0; i < call.inputs.size(); ++i) {
        // Surplus inputs are typed as the last declared one; the host reports the arity error.
        const ScalarType t = shape.in_types.empty() ? ScalarType::Float64
                                                    : shape.in_types[std::min(i, shape.in_types.size() - 1)];
        inputs.push_back(parse_array(call.inputs[i], t, "--input " + std::to_string(i)));
    }
    const auto outputs = plugin->call(call.function, inputs);
    for (std::size_t k = 0; k < outputs.size(); ++k) {
        out << "out" << k << " = ";
        std::visit(
            [&](const auto& v) {
                using T = typename std::decay_t<decltype(v)>::value_type;
                for (std::size_t i = 0; i < v.size(); ++i) {
                    out << (i ? ", " : "");
                    if constexpr (std::is_same_v<T, std::int32_t>)
                        out << v[i];
                    else
                        out << fmt(v[i], std::is_same_v<T, float> ? 9 : 17);
                }
            },
            outputs[k]);
        out << '\n';
    }
    return ok;
}

struct BenchOptions {
    std::optional<std::size_t> points;
};

int cmd_bench(const Common& o, const BenchOptions& b, std::ostream& out, std::ostream& err)
{
    const double mass = 1.0;
    const auto v = PotentialSpec::cornell(0.1, 0.5);
    RunConfig c;
    if (!o.config.empty())
        c = RunConfig::load(o.config);
    RadialMesh mesh = config_mesh(c, default_mesh(v, mass));
    if (b.points)
        mesh = RadialMesh(mesh.r_min(), mesh.r_max(), *b.points);
    const ShootingConfig cfg = config_solver(c, mass);
    const std::pair<int, double> rows[] = {{0, 2.15789}, {1, 3.10952}, {2, 3.93850}, {20, 13.5995}};

    const auto total = std::chrono::steady_clock::now();
    const ShootingSolver solver({v, 1, mass, mesh});
    bool all_match = true;
    out << "n,energy,expected,seconds\n";
    for (const auto& [n, expected] : rows) {
        const auto start = std::chrono::steady_clock::now();
        const auto s = solver.solve(cfg, n);
        const double elapsed = seconds_since(start);
        const bool match = std::abs(s.energy - expected) <= 5e-4 * expected;
        all_match = all_match && match;
        out << n << ',' << fmt(s.energy) << ',' << fmt(expected) << ',' << fmt(elapsed, 4) << '\n';
        if (!match)
            err << "bench: n = " << n << " gave " << fmt(s.energy) << ", expected " << fmt(expected) << '\n';
    }
    out << "total_seconds = " << fmt(seconds_since(total), 4) << '\n';
    return all_match ? ok : no_convergence;
}

int exit_code_for(const std::exception& e)
{
    if (dynamic_cast<const NotBracketedError*>(&e))
        return not_bracketed;
    if (dynamic_cast<const PluginError*>(&e))
        return plugin_failure;
    if (dynamic_cast<const ConvergenceError*>(&e) || dynamic_cast<const FitError*>(&e)
        || dynamic_cast<const SingularJacobianError*>(&e) || dynamic_cast<const PerturbationError*>(&e)
        || dynamic_cast<const DegenerateError*>(&e))
        return no_convergence;
    return malformed_input;
}

} // namespace

void write_csv(const fs::path& path, const RadialMesh& mesh, const std::vector<std::string>& names,
               const std::vector<const std::vector<double>*>& columns)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw ConfigError("cannot write " + path.string());
    f << 'r';
    for (const auto& n : names)
        f << ',' << n;
    f << '\n';
    char buf[64];
    for (std::size_t i = 0; i < mesh.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", mesh.r(i));
        f << buf;
        for (const auto* c : columns) {
            std::snprintf(buf, sizeof buf, ",%.17g", (*c)[i]);
            f << buf;
        }
        f << '\n';
    }
    if (!f)
        throw ConfigError("error while writing " + path.string());
}

void write_svg(const fs::path& path, const RadialMesh& mesh, const std::vector<std::string>& names,
               const std::vector<const std::vector<double>*>& columns)
{
    constexpr double width = 800.0, height = 500.0, margin = 40.0;
    constexpr std::size_t max_vertices = 4000;
    static const char* const colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

    double lo = 0.0, hi = 0.0;
    for (const auto* c : columns)
        for (double y : *c) {
            lo = std::min(lo, y);
            hi = std::max(hi, y);
        }
    if (hi == lo)
        hi = lo + 1.0;
    const std::size_t stride = std::max<std::size_t>(1, (mesh.size() + max_vertices - 1) / max_vertices);
    auto x_of = [&](std::size_t i) {
        return margin + (width - 2 * margin) * (mesh.r(i) - mesh.r_min()) / (mesh.r_max() - mesh.r_min());
    };
    auto y_of = [&](double y) { return height - margin - (height - 2 * margin) * (y - lo) / (hi - lo); };

    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw ConfigError("cannot write " + path.string());
    char buf[96];
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" viewBox=\"0 0 800 500\">\n";
    f << "<rect width=\"800\" height=\"500\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof buf, "%.2f", y_of(0.0));
    f << "<line x1=\"" << margin << "\" x2=\"" << width - margin << "\" y1=\"" << buf << "\" y2=\"" << buf
      << "\" stroke=\"#999\" stroke-width=\"0.5\"/>\n";
    for (std::size_t k = 0; k < columns.size(); ++k) {
        f << "<polyline fill=\"none\" stroke-width=\"1.2\" stroke=\"" << colours[k % 5] << "\" points=\"";
        for (std::size_t i = 0; i < mesh.size(); i += stride) {
            std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", i ? " " : "", x_of(i), y_of((*columns[k])[i]));
            f << buf;
        }
        f << "\"/>\n";
        std::snprintf(buf, sizeof buf, "%.0f", margin + 14.0 * static_cast<double>(k + 1));
        f << "<text x=\"" << width - margin - 60 << "\" y=\"" << buf << "\" font-size=\"12\" fill=\""
          << colours[k % 5] << "\">" << names[k] << "</text>\n";
    }
    f << "<text x=\"" << width / 2 << "\" y=\"" << height - 10 << "\" font-size=\"12\">r</text>\n";
    f << "</svg>\n";
    if (!f)
        throw ConfigError("error while writing " + path.string());
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Bound states of radial and coupled-channel Schroedinger equations by shooting"};
    app.require_subcommand(1);

    Common common;
    CallOptions call;
    BenchOptions bench;

    auto add_config = [&](CLI::App* sub, bool required) {
        auto* opt = sub->add_option("--config", common.config, "Run configuration file");
        if (required)
            opt->required()->check(CLI::ExistingFile);
        else
            opt->check(CLI::ExistingFile);
    };
    auto add_plugin = [&](CLI::App* sub) {
        sub->add_option("--plugin", common.plugin.library, "Shared library overriding the configured one");
        sub->add_option("--manifest", common.plugin.manifest, "Manifest for --plugin");
    };
    auto add_level = [&](CLI::App* sub) {
        sub->add_option("--n", common.n, "Node count / radial excitation")->check(CLI::NonNegativeNumber);
        sub->add_option("--l", common.l, "Angular momentum, overrides [problem] l")->check(CLI::NonNegativeNumber);
    };
    auto add_output = [&](CLI::App* sub) {
        auto* out_opt = sub->add_option("--out", common.outputs.csv, "CSV file for the wavefunction");
        sub->add_flag("--svg", common.outputs.svg, "Also write an SVG plot next to the CSV")->needs(out_opt);
    };

    auto* solve = app.add_subcommand("solve", "Single-channel eigenvalue and wavefunction");
    add_config(solve, true);
    add_level(solve);
    add_output(solve);
    add_plugin(solve);

    auto* coupled = app.add_subcommand("coupled", "Coupled-channel eigenvalue and components");
    add_config(coupled, true);
    add_level(coupled);
    add_output(coupled);

    auto* spectrum = app.add_subcommand("spectrum", "Perturbative bound-state mass");
    add_config(spectrum, true);
    add_level(spectrum);
    add_plugin(spectrum);
    spectrum->add_option("--basis-max", common.basis_max, "Highest level in the second-order sum")
        ->check(CLI::PositiveNumber);

    auto* fit = app.add_subcommand("fit", "Fit (a, k, m) to three bound-state masses");
    add_config(fit, true);
    add_plugin(fit);
    fit->add_option("--basis-max", common.basis_max, "Highest level in the second-order sum")->check(CLI::PositiveNumber);

    auto* scan = app.add_subcommand("scan", "Node count on the energy grid");
    add_config(scan, true);
    scan->add_option("--l", common.l, "Angular momentum, overrides [problem] l")->check(CLI::NonNegativeNumber);
    add_plugin(scan);

    auto* callc = app.add_subcommand("call", "Call a plugin function on flat arrays");
    add_plugin(callc);
    callc->add_option("function", call.function, "Function name")->required();
    callc->add_option("--input", call.inputs, "Comma-separated input array, once per input, in order");
    callc->add_option("--in-lengths", call.in_lengths, "Override input lengths, e.g. 10,1");
    callc->add_option("--out-lengths", call.out_lengths, "Override output lengths");

    auto* benchc = app.add_subcommand("bench", "Reference Cornell levels with timings");
    add_config(benchc, false);
    benchc->add_option("--points", bench.points, "Mesh points")->check(CLI::Range(16, 100000000));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ok : malformed_input;
    }

    try {
        if (*solve)
            return cmd_solve(common, out);
        if (*coupled)
            return cmd_coupled(common, out);
        if (*spectrum)
            return cmd_spectrum(common, out);
        if (*fit)
            return cmd_fit(common, out);
        if (*scan)
            return cmd_scan(common, out);
        if (*callc)
            return cmd_call(common, call, out);
        if (*benchc)
            return cmd_bench(common, bench, out, err);
    } catch (const FitError& e) {
        err << "error: " << e.what() << " (best a = " << fmt(e.a) << ", k = " << fmt(e.k) << ", m = " << fmt(e.m)
            << ", max residual " << fmt(e.max_residual, 4) << ")\n";
        return no_convergence;
    } catch (const ConvergenceError& e) {
        err << "error: " << e.what() << " (bracket [" << fmt(e.lower, 15) << ", " << fmt(e.upper, 15) << "])\n";
        return no_convergence;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return malformed_input;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args)
        argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

} // namespace qshoot::cli
