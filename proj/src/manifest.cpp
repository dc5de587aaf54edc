#include "qshoot/manifest.hpp"

#include "qshoot/ini.hpp"

#include <charconv>
#include <set>
#include <sstream>

namespace qshoot {

std::size_t scalar_size(ScalarType t)
{
    return t == ScalarType::Float64 ? 8 : 4;
}

std::string_view scalar_name(ScalarType t)
{
    switch (t) {
    case ScalarType::Int32:
        return "INT32";
    case ScalarType::Float32:
        return "FLOAT32";
    case ScalarType::Float64:
        return "FLOAT64";
    }
    return "?";
}

std::optional<ScalarType> parse_scalar_type(std::string_view token)
{
    if (token == "INT32")
        return ScalarType::Int32;
    if (token == "FLOAT32")
        return ScalarType::Float32;
    if (token == "FLOAT64")
        return ScalarType::Float64;
    return std::nullopt;
}

const FunctionShape* PluginManifest::find(std::string_view name) const
{
    for (const auto& f : functions)
        if (f.name == name)
            return &f;
    return nullptr;
}

namespace {

constexpr std::string_view section_prefix = "function ";

bool is_identifier(std::string_view s)
{
    if (s.empty() || (s[0] >= '0' && s[0] <= '9'))
        return false;
    for (char c : s)
        if (!(c == '_' || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9')))
            return false;
    return true;
}

std::vector<std::size_t> parse_lengths(const IniEntry& e)
{
    std::vector<std::size_t> out;
    for (const auto& token : split_list(e.value)) {
        std::size_t v = 0;
        const auto* end = token.data() + token.size();
        const auto [ptr, ec] = std::from_chars(token.data(), end, v);
        if (token.empty() || ec != std::errc{} || ptr != end)
            throw ManifestError(ManifestErrorKind::Length, e.line, e.key + ": '" + token + "' is not a length");
        if (v < 1)
            throw ManifestError(ManifestErrorKind::Length, e.line, e.key + ": lengths must be at least 1");
        out.push_back(v);
    }
    return out;
}

std::vector<ScalarType> parse_types(const IniEntry& e)
{
    std::vector<ScalarType> out;
    for (const auto& token : split_list(e.value)) {
        const auto t = parse_scalar_type(token);
        if (!t)
            throw ManifestError(ManifestErrorKind::Type, e.line,
                                e.key + ": unknown scalar type '" + token + "' (INT32, FLOAT32, FLOAT64)");
        out.push_back(*t);
    }
    return out;
}

bool parse_flag(const IniEntry& e)
{
    if (e.value == "true")
        return true;
    if (e.value == "false")
        return false;
    throw ManifestError(ManifestErrorKind::Syntax, e.line, e.key + " must be true or false");
}

void append_list(std::ostringstream& out, const char* key, const auto& values, auto&& format)
{
    out << key << " = ";
    for (std::size_t i = 0; i < values.size(); ++i)
        out << (i ? ", " : "") << format(values[i]);
    out << '\n';
}

} // namespace

PluginManifest parse_manifest(std::string_view text)
{
    IniDocument doc;
    try {
        doc = parse_ini(text);
    } catch (const IniSyntaxError& e) {
        throw ManifestError(ManifestErrorKind::Syntax, e.line, e.detail);
    }

    PluginManifest manifest;
    std::set<std::string, std::less<>> names;
    for (const auto& section : doc.sections) {
        std::string_view header = section.name;
        if (!header.starts_with(section_prefix))
            throw ManifestError(ManifestErrorKind::Syntax, section.line,
                                "expected '[function <name>]', got '[" + section.name + "]'");
        const std::string_view name = trim(header.substr(section_prefix.size()));
        if (!is_identifier(name))
            throw ManifestError(ManifestErrorKind::Syntax, section.line, "'" + std::string(name) + "' is not a symbol name");
        if (!names.emplace(name).second)
            throw ManifestError(ManifestErrorKind::Duplicate, section.line, "function '" + std::string(name) + "' declared twice");

        FunctionShape shape;
        shape.name = std::string(name);
        std::set<std::string, std::less<>> seen;
        const IniEntry* lines[4] = {};
        for (const auto& e : section.entries) {
            if (!seen.insert(e.key).second)
                throw ManifestError(ManifestErrorKind::Duplicate, e.line, "key '" + e.key + "' repeated");
            if (e.key == "out_lengths") {
                shape.out_lengths = parse_lengths(e);
                lines[0] = &e;
            } else if (e.key == "out_types") {
                shape.out_types = parse_types(e);
                lines[1] = &e;
            } else if (e.key == "in_lengths") {
                shape.in_lengths = parse_lengths(e);
                lines[2] = &e;
            } else if (e.key == "in_types") {
                shape.in_types = parse_types(e);
                lines[3] = &e;
            } else if (e.key == "overridable") {
                shape.overridable = parse_flag(e);
            } else if (e.key == "reentrant") {
                shape.reentrant = parse_flag(e);
            } else {
                throw ManifestError(ManifestErrorKind::Syntax, e.line, "unknown key '" + e.key + "'");
            }
        }
        static constexpr const char* required[4] = {"out_lengths", "out_types", "in_lengths", "in_types"};
        for (int k = 0; k < 4; ++k)
            if (!lines[k])
                throw ManifestError(ManifestErrorKind::Missing, section.line,
                                    "function '" + shape.name + "' lacks " + required[k]);
        if (shape.out_lengths.size() != shape.out_types.size())
            throw ManifestError(ManifestErrorKind::Arity, lines[1]->line,
                                "function '" + shape.name + "': " + std::to_string(shape.out_lengths.size())
                                    + " output lengths but " + std::to_string(shape.out_types.size()) + " output types");
        if (shape.in_lengths.size() != shape.in_types.size())
            throw ManifestError(ManifestErrorKind::Arity, lines[3]->line,
                                "function '" + shape.name + "': " + std::to_string(shape.in_lengths.size())
                                    + " input lengths but " + std::to_string(shape.in_types.size()) + " input types");
        if (shape.out_types.empty())
            throw ManifestError(ManifestErrorKind::Arity, lines[1]->line,
                                "function '" + shape.name + "' declares no outputs");
        if (shape.arity() > max_plugin_arity)
            throw ManifestError(ManifestErrorKind::Arity, section.line,
                                "function '" + shape.name + "' takes more than "
                                    + std::to_string(max_plugin_arity) + " arrays");
        manifest.functions.push_back(std::move(shape));
    }
    if (manifest.functions.empty())
        throw ManifestError(ManifestErrorKind::Missing, 0, "manifest declares no functions");
    return manifest;
}

PluginManifest load_manifest(const std::filesystem::path& path)
{
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const ConfigError& e) {
        throw PluginLoadError(e.what());
    }
    return parse_manifest(text);
}

std::string serialize_manifest(const PluginManifest& m)
{
    std::ostringstream out;
    auto number = [](std::size_t v) { return std::to_string(v); };
    auto type = [](ScalarType t) { return std::string(scalar_name(t)); };
    for (std::size_t i = 0; i < m.functions.size(); ++i) {
        const auto& f = m.functions[i];
        if (i)
            out << '\n';
        out << "[function " << f.name << "]\n";
        append_list(out, "out_lengths", f.out_lengths, number);
        append_list(out, "out_types", f.out_types, type);
        append_list(out, "in_lengths", f.in_lengths, number);
        append_list(out, "in_types", f.in_types, type);
        out << "overridable = " << (f.overridable ? "true" : "false") << '\n';
        out << "reentrant = " << (f.reentrant ? "true" : "false") << '\n';
    }
    return out.str();
}

} // namespace qshoot
