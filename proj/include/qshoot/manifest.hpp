#pragma once

#include "qshoot/errors.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qshoot {

enum class ScalarType { Int32, Float32, Float64 };

/// 4, 4 and 8 bytes.
std::size_t scalar_size(ScalarType t);
/// "INT32", "FLOAT32", "FLOAT64".
std::string_view scalar_name(ScalarType t);
std::optional<ScalarType> parse_scalar_type(std::string_view token);

/// Declared signature of one plugin function: `void name(out..., in...)`, every parameter the
/// base address of a flat array.
struct FunctionShape {
    std::string name;
    std::vector<std::size_t> out_lengths;
    std::vector<ScalarType> out_types;
    std::vector<std::size_t> in_lengths;
    std::vector<ScalarType> in_types;
    bool overridable = false;
    bool reentrant = false;

    std::size_t arity() const { return out_types.size() + in_types.size(); }
    bool operator==(const FunctionShape&) const = default;
};

/// Most parameters a plugin function may take (outputs plus inputs).
inline constexpr std::size_t max_plugin_arity = 16;

struct PluginManifest {
    std::vector<FunctionShape> functions;

    const FunctionShape* find(std::string_view name) const;
    bool operator==(const PluginManifest&) const = default;
};

/// Grammar:
///   [function <name>]
///   out_lengths = 1, 2        # positive integers
///   out_types   = INT32, FLOAT32
///   in_lengths  = 1
///   in_types    = FLOAT64
///   overridable = true        # optional, default false
///   reentrant   = false       # optional, default false
/// Throws ManifestError with the offending line and its kind.
PluginManifest parse_manifest(std::string_view text);
PluginManifest load_manifest(const std::filesystem::path& path);

/// Canonical text; parse_manifest(serialize_manifest(m)) == m.
std::string serialize_manifest(const PluginManifest& m);

} // namespace qshoot
