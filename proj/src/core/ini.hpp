#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace epi {

/// Minimal INI reader: `[section]` headers, `key = value` lines, `#` or `;` comments.
class IniFile {
public:
    static IniFile parse(const std::string& text, const std::string& origin = "<string>");
    static IniFile load(const std::string& path);

    bool has_section(const std::string& section) const;
    bool has(const std::string& section, const std::string& key) const;
    std::optional<std::string> get(const std::string& section, const std::string& key) const;
    std::vector<std::string> keys(const std::string& section) const;

    /// Throws ConfigError naming [section].key when absent or malformed.
    std::string require(const std::string& section, const std::string& key) const;
    double number(const std::string& section, const std::string& key) const;
    double number(const std::string& section, const std::string& key, double fallback) const;
    long integer(const std::string& section, const std::string& key) const;
    long integer(const std::string& section, const std::string& key, long fallback) const;

    const std::string& origin() const { return origin_; }

private:
    std::string origin_;
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

/// "[section].key" for diagnostics.
std::string qualified(const std::string& section, const std::string& key);

/// Parses a finite double; returns nullopt on any trailing garbage.
std::optional<double> parse_number(const std::string& text);

}  // namespace epi
