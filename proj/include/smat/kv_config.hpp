#ifndef SMAT_KV_CONFIG_HPP
#define SMAT_KV_CONFIG_HPP

#include "smat/geometry.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

namespace smat {

/**
 * Plain-text `key = value` configuration. `#` starts a comment; blank lines
 * are skipped. Every key must be consumed by a getter, otherwise
 * `check_all_used()` reports it (catches typos in scenario files).
 */
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::istream& in, const std::string& source = "<config>") {
    KeyValueConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
      if (cfg.values_.contains(key))
        throw ConfigError(source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse(in, path);
  }

  bool has(const std::string& key) const { return values_.contains(key); }

  double get_double(const std::string& key, double fallback) const {
    auto it = lookup(key);
    if (!it) return fallback;
    double v = 0.0;
    std::istringstream ss(*it);
    if (!(ss >> v) || !(ss >> std::ws).eof() || !std::isfinite(v))
      throw ConfigError("config key '" + key + "' is not a finite number: " + *it);
    return v;
  }

  long long get_int(const std::string& key, long long fallback) const {
    auto it = lookup(key);
    if (!it) return fallback;
    long long v = 0;
    const auto* b = it->data();
    const auto* e = it->data() + it->size();
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e) throw ConfigError("config key '" + key + "' is not an integer: " + *it);
    return v;
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  void check_all_used() const {
    for (const auto& [k, v] : values_)
      if (!used_.contains(k)) throw ConfigError("unknown config key '" + k + "'");
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  const std::string* lookup(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace smat

#endif  // SMAT_KV_CONFIG_HPP
