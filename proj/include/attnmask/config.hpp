#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace attnmask {

// TOML subset: `[section]` headers, `key = value` lines, `#` comments.
// Values are "strings", integers, floats, true/false, or single-line arrays of
// those. Keys are addressed as "section.key".
class Config {
 public:
  static Config parse(std::string_view text, const std::string& source = "<config>");
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_strings(const std::string& key, const std::vector<std::string>& fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<int> get_ints(const std::string& key, const std::vector<int>& fallback) const;

  // Overrides or adds a key with a raw value in config syntax.
  void set(const std::string& key, const std::string& raw);
  std::vector<std::string> keys() const;
  // Throws ValidationError naming every key no getter has read.
  void require_consumed() const;

 private:
  struct Value {
    std::string raw;
    std::string where;
  };
  const Value* find(const std::string& key) const;

  std::map<std::string, Value> values_;
  mutable std::set<std::string> consumed_;
};

}  // namespace attnmask
