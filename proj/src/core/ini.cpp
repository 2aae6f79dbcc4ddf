#include "ini.hpp"

#include "errors.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace epi {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

}  // namespace

std::string qualified(const std::string& section, const std::string& key) {
    return "[" + section + "]." + key;
}

std::optional<double> parse_number(const std::string& text) {
    const std::string t = trim(text);
    if (t.empty()) return std::nullopt;
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(t.c_str(), &end);
    if (errno != 0 || end != t.c_str() + t.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

IniFile IniFile::parse(const std::string& text, const std::string& origin) {
    IniFile ini;
    ini.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto comment = line.find_first_of("#;");
        if (comment != std::string::npos) line.erase(comment);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) throw ConfigError(where + ": empty section name");
            ini.sections_[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        if (section.empty()) throw ConfigError(where + ": key outside of any section");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(where + ": empty key");
        auto& entries = ini.sections_[section];
        if (entries.count(key)) throw ConfigError(where + ": duplicate key " + qualified(section, key));
        entries[key] = trim(line.substr(eq + 1));
    }
    return ini;
}

IniFile IniFile::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
}

bool IniFile::has_section(const std::string& section) const { return sections_.count(section) > 0; }

bool IniFile::has(const std::string& section, const std::string& key) const {
    const auto it = sections_.find(section);
    return it != sections_.end() && it->second.count(key) > 0;
}

std::optional<std::string> IniFile::get(const std::string& section, const std::string& key) const {
    const auto it = sections_.find(section);
    if (it == sections_.end()) return std::nullopt;
    const auto kv = it->second.find(key);
    if (kv == it->second.end()) return std::nullopt;
    return kv->second;
}

std::vector<std::string> IniFile::keys(const std::string& section) const {
    std::vector<std::string> out;
    const auto it = sections_.find(section);
    if (it == sections_.end()) return out;
    for (const auto& kv : it->second) out.push_back(kv.first);
    return out;
}

std::string IniFile::require(const std::string& section, const std::string& key) const {
    auto v = get(section, key);
    if (!v) throw ConfigError(origin_ + ": missing " + qualified(section, key));
    return *v;
}

double IniFile::number(const std::string& section, const std::string& key) const {
    const std::string raw = require(section, key);
    const auto v = parse_number(raw);
    if (!v) throw ConfigError(origin_ + ": " + qualified(section, key) + " = '" + raw + "' is not a finite number");
    return *v;
}

double IniFile::number(const std::string& section, const std::string& key, double fallback) const {
    return has(section, key) ? number(section, key) : fallback;
}

long IniFile::integer(const std::string& section, const std::string& key) const {
    const double v = number(section, key);
    if (v != std::floor(v) || std::abs(v) > 1e15) {
        throw ConfigError(origin_ + ": " + qualified(section, key) + " must be an integer");
    }
    return static_cast<long>(v);
}

long IniFile::integer(const std::string& section, const std::string& key, long fallback) const {
    return has(section, key) ? integer(section, key) : fallback;
}

}  // namespace epi
