#pragma once

#include "qshoot/errors.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace qshoot {

/// Line-oriented `[section]` / `key = value` text with `#` comments, shared by run configs and
/// plugin manifests. Keys and section names keep their case; surrounding blanks are trimmed.
struct IniEntry {
    std::string key;
    std::string value;
    std::size_t line;
};

struct IniSection {
    std::string name;
    std::size_t line;
    std::vector<IniEntry> entries;

    /// First entry with this key, or nullptr.
    const IniEntry* find(std::string_view key) const;
};

struct IniDocument {
    std::vector<IniSection> sections;

    /// First section with this name, or nullptr.
    const IniSection* find(std::string_view name) const;
};

/// Malformed line. `line` is 1-based.
class IniSyntaxError : public ConfigError {
public:
    IniSyntaxError(std::size_t l, const std::string& msg)
        : ConfigError("line " + std::to_string(l) + ": " + msg), line(l), detail(msg) {}
    std::size_t line;
    std::string detail;
};

/// Entries before the first header and lines that are neither headers, comments nor
/// `key = value` raise IniSyntaxError. Duplicates are kept; callers decide.
IniDocument parse_ini(std::string_view text);

/// Reads the whole file; ConfigError when it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);

std::string_view trim(std::string_view s);

/// Splits on commas and trims each piece. An all-blank input yields an empty list.
std::vector<std::string> split_list(std::string_view s);

} // namespace qshoot
