#include "qshoot/ini.hpp"

#include <fstream>
#include <sstream>

namespace qshoot {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\f\v");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r\f\v");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(std::string_view s)
{
    std::vector<std::string> out;
    if (trim(s).empty())
        return out;
    while (true) {
        const auto comma = s.find(',');
        out.emplace_back(trim(s.substr(0, comma)));
        if (comma == std::string_view::npos)
            return out;
        s.remove_prefix(comma + 1);
    }
}

const IniEntry* IniSection::find(std::string_view key) const
{
    for (const auto& e : entries)
        if (e.key == key)
            return &e;
    return nullptr;
}

const IniSection* IniDocument::find(std::string_view name) const
{
    for (const auto& s : sections)
        if (s.name == name)
            return &s;
    return nullptr;
}

IniDocument parse_ini(std::string_view text)
{
    IniDocument doc;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto eol = text.find('\n');
        std::string_view line = text.substr(0, eol);
        text.remove_prefix(eol == std::string_view::npos ? text.size() : eol + 1);

        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                throw IniSyntaxError(line_no, "section header is missing ']'");
            const std::string_view name = trim(line.substr(1, line.size() - 2));
            if (name.empty())
                throw IniSyntaxError(line_no, "empty section name");
            if (name.find_first_of("[]") != std::string_view::npos)
                throw IniSyntaxError(line_no, "brackets inside a section name");
            doc.sections.push_back({std::string(name), line_no, {}});
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw IniSyntaxError(line_no, "expected 'key = value'");
        const std::string_view key = trim(line.substr(0, eq));
        if (key.empty())
            throw IniSyntaxError(line_no, "empty key");
        if (key.find_first_of(" \t[]") != std::string_view::npos)
            throw IniSyntaxError(line_no, "malformed key '" + std::string(key) + "'");
        if (doc.sections.empty())
            throw IniSyntaxError(line_no, "key '" + std::string(key) + "' outside any section");
        doc.sections.back().entries.push_back({std::string(key), std::string(trim(line.substr(eq + 1))), line_no});
    }
    return doc;
}

std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

} // namespace qshoot
