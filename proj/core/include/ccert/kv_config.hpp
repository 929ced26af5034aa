#pragma once

// `key = value` config files with `#` comments. Keys must come from a fixed
// allow-list so a typo fails loudly instead of silently using a default.

#include <map>
#include <set>
#include <string>
#include <string_view>

namespace ccert {

class KvConfig {
 public:
  explicit KvConfig(std::set<std::string> allowed) : allowed_(std::move(allowed)) {}

  // Throws ParseError (with line number) on malformed lines and ConfigError
  // on unknown or repeated keys.
  void parse(std::string_view text, const std::string& origin = "config");
  void load(const std::string& path);
  // Later calls win; unknown keys throw ConfigError.
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_long(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  // One `key = value` line per entry, sorted by key.
  std::string dump() const;

 private:
  std::set<std::string> allowed_;
  std::map<std::string, std::string> values_;
};

}  // namespace ccert
