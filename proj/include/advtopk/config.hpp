#pragma once

#include <map>
#include <optional>
#include <string>

namespace advtopk {

// Flat key = value configuration with three layers of precedence:
// explicit overrides (CLI flags) > environment (ADVTOPK_<KEY>) > file.
// '#' starts a comment; keys use lower-case words joined by '-' or '.'.
class Config {
public:
    Config() = default;
    static Config load(const std::string& path);

    void set(const std::string& key, const std::string& value);  // highest precedence
    std::optional<std::string> lookup(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    static std::string env_name(const std::string& key);

private:
    std::map<std::string, std::string> file_;
    std::map<std::string, std::string> overrides_;
};

}  // namespace advtopk
