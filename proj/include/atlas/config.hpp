#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace atlas {

// Flat key/value settings read from a TOML-style file:
//
//   backend = "toy"
//   [map]
//   rows = 64          # becomes "map.rows"
//
// Environment variables ATLAS_<KEY> override file values, with dots in the
// key written as underscores and letters upper-cased (ATLAS_MAP_ROWS).
class Config {
public:
    Config() = default;

    static Config parse(const std::string& text);
    static Config load(const std::filesystem::path& path);

    // Applies overrides from the environment for every known key, plus any
    // ATLAS_* variable that names a key in `extra_keys`.
    void apply_env(const std::vector<std::string>& extra_keys = {});

    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::optional<std::string> get(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;

    // Keys with the given prefix, prefix stripped ("corpora." -> name).
    std::map<std::string, std::string> section(const std::string& prefix) const;
    const std::map<std::string, std::string>& values() const noexcept { return values_; }

    static std::string env_name(const std::string& key);

private:
    std::map<std::string, std::string> values_;
};

}  // namespace atlas
