#include "atlas/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <sstream>

#include "atlas/errors.hpp"
#include "atlas/image.hpp"

namespace atlas {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return "";
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

// Drops a trailing "# comment" that is not inside double quotes.
std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) {
            quoted = !quoted;
        } else if (line[i] == '#' && !quoted) {
            return line.substr(0, i);
        }
    }
    return line;
}

std::string unquote(const std::string& value, std::size_t line) {
    if (value.size() < 2 || (value.front() != '"' && value.front() != '\'')) {
        return value;
    }
    const char q = value.front();
    if (value.back() != q) {
        throw Error(ErrorKind::ConfigError, "line " + std::to_string(line) + ": unterminated string");
    }
    std::string out;
    for (std::size_t i = 1; i + 1 < value.size(); ++i) {
        if (q == '"' && value[i] == '\\' && i + 2 < value.size()) {
            const char next = value[++i];
            out.push_back(next == 'n' ? '\n' : next == 't' ? '\t' : next);
        } else {
            out.push_back(value[i]);
        }
    }
    return out;
}

}  // namespace

Config Config::parse(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string s = trim(strip_comment(raw));
        if (s.empty()) {
            continue;
        }
        if (s.front() == '[') {
            if (s.back() != ']' || s.size() < 3) {
                throw Error(ErrorKind::ConfigError, "line " + std::to_string(line) + ": bad section header");
            }
            section = trim(s.substr(1, s.size() - 2));
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::ConfigError, "line " + std::to_string(line) + ": expected key = value");
        }
        std::string key = trim(s.substr(0, eq));
        if (key.empty()) {
            throw Error(ErrorKind::ConfigError, "line " + std::to_string(line) + ": empty key");
        }
        if (!section.empty()) {
            key = section + "." + key;
        }
        cfg.values_[key] = unquote(trim(s.substr(eq + 1)), line);
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return parse(std::string(bytes.begin(), bytes.end()));
}

std::string Config::env_name(const std::string& key) {
    std::string out = "ATLAS_";
    for (char c : key) {
        out.push_back(c == '.' || c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    return out;
}

void Config::apply_env(const std::vector<std::string>& extra_keys) {
    std::vector<std::string> keys;
    for (const auto& [k, v] : values_) {
        keys.push_back(k);
    }
    keys.insert(keys.end(), extra_keys.begin(), extra_keys.end());
    for (const auto& k : keys) {
        if (const char* v = std::getenv(env_name(k).c_str())) {
            values_[k] = v;
        }
    }
}

std::optional<std::string> Config::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
    const auto v = get(key);
    if (!v) {
        return fallback;
    }
    std::int64_t out = 0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size()) {
        throw Error(ErrorKind::ConfigError, key + ": expected an integer, got '" + *v + "'");
    }
    return out;
}

double Config::get_double(const std::string& key, double fallback) const {
    const auto v = get(key);
    if (!v) {
        return fallback;
    }
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size()) {
        throw Error(ErrorKind::ConfigError, key + ": expected a number, got '" + *v + "'");
    }
    return out;
}

std::map<std::string, std::string> Config::section(const std::string& prefix) const {
    std::map<std::string, std::string> out;
    for (auto it = values_.lower_bound(prefix); it != values_.end() && it->first.rfind(prefix, 0) == 0; ++it) {
        out[it->first.substr(prefix.size())] = it->second;
    }
    return out;
}

}  // namespace atlas
