#include "qshoot/cli.hpp"
#include "qshoot/mesh.hpp"

#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

const fs::path configs = fs::path(QSHOOT_SOURCE_DIR) / "configs";
const fs::path fixtures = QSHOOT_FIXTURE_DIR;

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args)
{
    args.insert(args.begin(), "qshoot");
    std::ostringstream out, err;
    const int code = qshoot::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

// Value of `key = value` in a report, or NaN.
double report_value(const std::string& report, const std::string& key)
{
    std::istringstream in(report);
    std::string line;
    while (std::getline(in, line))
        if (line.starts_with(key + " = "))
            return std::stod(line.substr(key.size() + 3));
    return std::nan("");
}

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "qshoot_cli_test";
    fs::create_directories(dir);
    return dir / name;
}

fs::path write_file(const std::string& name, const std::string& text)
{
    const fs::path p = scratch(name);
    std::ofstream(p, std::ios::binary) << text;
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
}

std::vector<std::vector<double>> read_csv(const fs::path& p, std::string& header)
{
    std::ifstream f(p);
    std::getline(f, header);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(f, line)) {
        std::vector<double> row;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ','))
            row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

const std::string cornell_body = "[problem]\nmass = 1\nl = 1\n[potential]\ntype = cornell\na = 0.1\nk = 0.5\n";

} // namespace

TEST_CASE("solve reproduces the reference Cornell level")
{
    const auto r = run({"solve", "--config", (configs / "cornell.cfg").string(), "--n", "1"});
    REQUIRE(r.code == qshoot::cli::ok);
    CHECK(std::abs(report_value(r.out, "energy") - 3.10952) < 5e-4 * 3.10952);
    CHECK(report_value(r.out, "nodes") == 1.0);
    CHECK(report_value(r.out, "tail_residual") < 1e-3);
}

TEST_CASE("coupled reproduces the hybrid ground state")
{
    const auto r = run({"coupled", "--config", (configs / "hybrid.cfg").string(), "--n", "0"});
    REQUIRE(r.code == qshoot::cli::ok);
    CHECK(std::abs(report_value(r.out, "energy") - 1.01727) < 5e-4);
    CHECK(report_value(r.out, "channels") == 2.0);
}

TEST_CASE("exit codes")
{
    SUBCASE("inverted mesh is malformed input")
    {
        const auto cfg = write_file("inverted.cfg", cornell_body + "[mesh]\nr_min = 5\nr_max = 1\npoints = 101\n");
        const auto r = run({"solve", "--config", cfg.string()});
        CHECK(r.code == qshoot::cli::malformed_input);
        CHECK(!r.err.empty());
    }
    SUBCASE("unknown section and unknown key")
    {
        auto cfg = write_file("section.cfg", cornell_body + "[extras]\nx = 1\n");
        CHECK(run({"solve", "--config", cfg.string()}).code == qshoot::cli::malformed_input);
        cfg = write_file("key.cfg", cornell_body + "colour = red\n");
        CHECK(run({"solve", "--config", cfg.string()}).code == qshoot::cli::malformed_input);
    }
    SUBCASE("syntax error and bad numbers")
    {
        auto cfg = write_file("syntax.cfg", "[problem\nmass = 1\n");
        CHECK(run({"solve", "--config", cfg.string()}).code == qshoot::cli::malformed_input);
        cfg = write_file("number.cfg", "[problem]\nmass = heavy\n[potential]\ntype = cornell\na = 0.1\nk = 0.5\n");
        CHECK(run({"solve", "--config", cfg.string()}).code == qshoot::cli::malformed_input);
    }
    SUBCASE("missing config file and missing subcommand")
    {
        CHECK(run({"solve", "--config", scratch("absent.cfg").string()}).code == qshoot::cli::malformed_input);
        CHECK(run({}).code == qshoot::cli::malformed_input);
        CHECK(run({"solve"}).code == qshoot::cli::malformed_input);
    }
    SUBCASE("--svg without --out")
    {
        CHECK(run({"solve", "--config", (configs / "cornell.cfg").string(), "--svg"}).code
              == qshoot::cli::malformed_input);
    }
    SUBCASE("no eigenvalue in the window")
    {
        const auto cfg = write_file("window.cfg", cornell_body + "[solver]\ne_max = 1\n");
        CHECK(run({"solve", "--config", cfg.string()}).code == qshoot::cli::not_bracketed);
    }
    SUBCASE("plugin failures")
    {
        const auto cfg = write_file("plugin.cfg", "[problem]\nl = 1\n[potential]\ntype = plugin\nfunction = cornell_batch\n");
        CHECK(run({"solve", "--config", cfg.string(), "--plugin", scratch("nope.so").string(), "--manifest",
                   (fixtures / "cornell.manifest").string()})
                  .code
              == qshoot::cli::plugin_failure);
        CHECK(run({"call", "--plugin", QSHOOT_FIXTURE_LISTINGS, "--manifest", (fixtures / "listings.manifest").string(),
                   "fun", "--input", "1,2"})
                  .code
              == qshoot::cli::plugin_failure);
        CHECK(run({"call", "--plugin", QSHOOT_FIXTURE_LISTINGS, "--manifest", (fixtures / "listings.manifest").string(),
                   "absent"})
                  .code
              == qshoot::cli::plugin_failure);
    }
    SUBCASE("bisection cap is numerical non-convergence")
    {
        const auto cfg = write_file("cap.cfg", cornell_body + "[solver]\nmax_bisect = 3\n");
        CHECK(run({"solve", "--config", cfg.string()}).code == qshoot::cli::no_convergence);
    }
    SUBCASE("fit iteration cap is numerical non-convergence")
    {
        const auto cfg = write_file("fitcap.cfg", slurp(configs / "fit.cfg") + "max_iterations = 1\n");
        const auto r = run({"fit", "--config", cfg.string()});
        CHECK(r.code == qshoot::cli::no_convergence);
        CHECK(r.err.find("best a") != std::string::npos);
    }
    SUBCASE("unwritable output")
    {
        const auto r = run({"solve", "--config", (configs / "cornell.cfg").string(), "--out",
                            (scratch("missing_dir") / "x" / "y.csv").string()});
        CHECK(r.code == qshoot::cli::malformed_input);
        CHECK(r.out.empty());
    }
}

TEST_CASE("wavefunction export")
{
    const fs::path csv = scratch("ground.csv");
    const auto r = run({"solve", "--config", (configs / "cornell.cfg").string(), "--out", csv.string(), "--svg"});
    REQUIRE(r.code == qshoot::cli::ok);
    std::string header;
    const auto rows = read_csv(csv, header);
    CHECK(header == "r,y");
    CHECK(rows.size() == 20001);
    const std::string text = slurp(csv);
    CHECK(text.find('\r') == std::string::npos);
    CHECK(text.back() == '\n');

    std::vector<double> y2;
    for (const auto& row : rows) {
        REQUIRE(row.size() == 2);
        y2.push_back(row[1] * row[1]);
    }
    const double h = (rows.back()[0] - rows.front()[0]) / static_cast<double>(rows.size() - 1);
    CHECK(std::abs(qshoot::simpson(y2, h) - 1.0) < 1e-8);

    const std::string svg = slurp(fs::path(csv).replace_extension(".svg"));
    CHECK(svg.starts_with("<svg"));
    CHECK(svg.find("<polyline") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
}

TEST_CASE("export is byte-identical across runs")
{
    const fs::path a = scratch("run_a.csv");
    const fs::path b = scratch("run_b.csv");
    REQUIRE(run({"solve", "--config", (configs / "cornell.cfg").string(), "--n", "2", "--out", a.string()}).code == 0);
    REQUIRE(run({"solve", "--config", (configs / "cornell.cfg").string(), "--n", "2", "--out", b.string()}).code == 0);
    CHECK(slurp(a) == slurp(b));
}

TEST_CASE("coupled export has one column per channel")
{
    const fs::path csv = scratch("hybrid.csv");
    REQUIRE(run({"coupled", "--config", (configs / "hybrid.cfg").string(), "--out", csv.string()}).code == 0);
    std::string header;
    const auto rows = read_csv(csv, header);
    CHECK(header == "r,u1,u2");
    REQUIRE(rows.size() == 20001);
    std::vector<double> sq;
    for (const auto& row : rows) {
        REQUIRE(row.size() == 3);
        sq.push_back(row[1] * row[1] + row[2] * row[2]);
    }
    CHECK(std::abs(qshoot::simpson(sq, rows[1][0] - rows[0][0]) - 1.0) < 1e-6);
}

TEST_CASE("bench")
{
    const double expected[] = {2.15789, 3.10952, 3.93850, 13.5995};
    auto rows_of = [](const std::string& out) {
        std::vector<std::vector<double>> rows;
        std::istringstream in(out);
        std::string line;
        std::getline(in, line);
        CHECK(line == "n,energy,expected,seconds");
        while (std::getline(in, line) && !line.starts_with("total")) {
            std::vector<double> row;
            std::istringstream cells(line);
            std::string cell;
            while (std::getline(cells, cell, ','))
                row.push_back(std::stod(cell));
            rows.push_back(row);
        }
        return rows;
    };
    const auto full = run({"bench"});
    REQUIRE(full.code == qshoot::cli::ok);
    const auto rows = rows_of(full.out);
    REQUIRE(rows.size() == 4);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(std::abs(rows[i][1] - expected[i]) <= 5e-4 * expected[i]);

    const auto halved = run({"bench", "--points", "10001"});
    REQUIRE(halved.code == qshoot::cli::ok);
    const auto coarse = rows_of(halved.out);
    REQUIRE(coarse.size() == 4);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(std::abs(coarse[i][1] - rows[i][1]) < 1e-3);
}

TEST_CASE("scan lists node counts on the grid")
{
    const auto cfg = write_file("scan.cfg", cornell_body + "[solver]\ne_min = 0\ne_max = 5\nscan_step = 0.1\n");
    const auto r = run({"scan", "--config", cfg.string()});
    REQUIRE(r.code == 0);
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    CHECK(line == "energy,nodes");
    int rows = 0;
    long previous = 0;
    while (std::getline(in, line)) {
        const long nodes = std::stol(line.substr(line.find(',') + 1));
        CHECK(nodes >= previous);
        previous = nodes;
        ++rows;
    }
    CHECK(rows == 51);
    CHECK(previous == 4);  // levels n = 0..3 lie below 5
}

TEST_CASE("call evaluates plugin functions")
{
    const std::string listings = (fixtures / "listings.manifest").string();
    auto r = run({"call", "--plugin", QSHOOT_FIXTURE_LISTINGS, "--manifest", listings, "fun2", "--input", "3",
                  "--input", "2.0,5.0"});
    REQUIRE(r.code == 0);
    CHECK(r.out == "out0 = 126\nout1 = 10, 32\n");
    r = run({"call", "--plugin", QSHOOT_FIXTURE_LISTINGS, "--manifest", listings, "fun", "--input", "7"});
    CHECK(r.out == "out0 = 42\n");

    const std::string sum = (fixtures / "sum.manifest").string();
    r = run({"call", "--plugin", QSHOOT_FIXTURE_SUM, "--manifest", sum, "sum", "--in-lengths", "10,1", "--input",
             "1,2,3,4,5,6,7,8,9,10", "--input", "10"});
    REQUIRE(r.code == 0);
    CHECK(r.out == "out0 = 55\n");
}

TEST_CASE("plugin potential through the config matches the native one")
{
    const auto cfg = write_file("plugin_cornell.cfg",
                                "[problem]\nl = 1\n[potential]\ntype = plugin\nfunction = cornell_batch\n");
    const auto plugin = run({"solve", "--config", cfg.string(), "--plugin", QSHOOT_FIXTURE_CORNELL, "--manifest",
                             (fixtures / "cornell.manifest").string()});
    REQUIRE(plugin.code == 0);
    const auto native = run({"solve", "--config", write_file("native_cornell.cfg", cornell_body).string()});
    REQUIRE(native.code == 0);
    // Both runs use the default bisect_tol.
    CHECK(std::abs(report_value(plugin.out, "energy") - report_value(native.out, "energy")) <= 1e-9);
}

TEST_CASE("every example config runs to success within the time budget")
{
    // Subcommand per example; a new config without an entry here fails the test.
    const std::map<std::string, std::vector<std::string>> commands = {
        {"cornell.cfg", {"solve", "--n", "1"}},   {"oscillator.cfg", {"solve", "--n", "2"}},
        {"hybrid.cfg", {"coupled", "--n", "1"}},  {"spectrum.cfg", {"spectrum", "--n", "0"}},
        {"fit.cfg", {"fit"}},                     {"tabulated.cfg", {"solve", "--n", "0"}},
        {"sum.cfg", {"solve", "--n", "0"}},
    };
    const auto start = std::chrono::steady_clock::now();
    int seen = 0;
    for (const auto& entry : fs::directory_iterator(configs)) {
        if (entry.path().extension() != ".cfg")
            continue;
        ++seen;
        const std::string name = entry.path().filename().string();
        INFO(name);
        const auto it = commands.find(name);
        REQUIRE(it != commands.end());
        auto args = it->second;
        args.insert(args.begin() + 1, {"--config", entry.path().string()});
        const auto r = run(args);
        INFO(r.err);
        CHECK(r.code == 0);
    }
    CHECK(seen == static_cast<int>(commands.size()));
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() < 60.0);
}

TEST_CASE("oscillator config matches the closed form")
{
    for (int n = 0; n <= 3; ++n) {
        const auto r = run({"solve", "--config", (configs / "oscillator.cfg").string(), "--n", std::to_string(n)});
        REQUIRE(r.code == 0);
        CHECK(std::abs(report_value(r.out, "energy") - (2.0 * n + 1.5)) < 1e-4);
    }
}

TEST_CASE("fit config recovers the generating parameters")
{
    const auto r = run({"fit", "--config", (configs / "fit.cfg").string()});
    REQUIRE(r.code == 0);
    CHECK(std::abs(report_value(r.out, "a") - 0.1) < 1e-3 * 0.1);
    CHECK(std::abs(report_value(r.out, "k") - 0.5) < 1e-3 * 0.5);
    CHECK(std::abs(report_value(r.out, "m") - 1.0) < 1e-3);
}
