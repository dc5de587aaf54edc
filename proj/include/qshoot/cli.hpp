#pragma once

#include "qshoot/mesh.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace qshoot::cli {

/// Exit codes of the command-line front end.
enum ExitCode : int {
    ok = 0,
    malformed_input = 1,
    not_bracketed = 2,
    plugin_failure = 3,
    no_convergence = 4,
};

/// Runs one command line (argv[0] is the program name). Never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// CSV with header `r,<names...>`, one row per mesh node, 17 significant digits, LF endings.
void write_csv(const std::filesystem::path& path, const RadialMesh& mesh, const std::vector<std::string>& names,
               const std::vector<const std::vector<double>*>& columns);

/// Minimal SVG document with one polyline per column.
void write_svg(const std::filesystem::path& path, const RadialMesh& mesh, const std::vector<std::string>& names,
               const std::vector<const std::vector<double>*>& columns);

} // namespace qshoot::cli
