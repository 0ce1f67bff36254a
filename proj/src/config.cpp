#include "advtopk/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace advtopk {

namespace {
std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}
}  // namespace

Config Config::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file " + path);
    Config cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty key");
        cfg.file_[key] = value;
    }
    return cfg;
}

void Config::set(const std::string& key, const std::string& value) { overrides_[key] = value; }

std::string Config::env_name(const std::string& key) {
    std::string name = "ADVTOPK_";
    for (char c : key) {
        if (c == '-' || c == '.') name += '_';
        else name += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return name;
}

std::optional<std::string> Config::lookup(const std::string& key) const {
    if (auto it = overrides_.find(key); it != overrides_.end()) return it->second;
    if (const char* env = std::getenv(env_name(key).c_str())) return std::string(env);
    if (auto it = file_.find(key); it != file_.end()) return it->second;
    return std::nullopt;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    return lookup(key).value_or(fallback);
}

long long Config::get_int(const std::string& key, long long fallback) const {
    const auto v = lookup(key);
    if (!v) return fallback;
    std::size_t used = 0;
    const long long out = std::stoll(*v, &used);
    if (used != v->size()) throw std::runtime_error("config key '" + key + "': '" + *v + "' is not an integer");
    return out;
}

double Config::get_double(const std::string& key, double fallback) const {
    const auto v = lookup(key);
    if (!v) return fallback;
    std::size_t used = 0;
    const double out = std::stod(*v, &used);
    if (used != v->size()) throw std::runtime_error("config key '" + key + "': '" + *v + "' is not a number");
    return out;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    const auto v = lookup(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
    if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
    throw std::runtime_error("config key '" + key + "': '" + *v + "' is not a boolean");
}

}  // namespace advtopk
