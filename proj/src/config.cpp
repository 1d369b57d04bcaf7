#include "attnmask/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include "attnmask/error.hpp"
#include "attnmask/image_io.hpp"

namespace attnmask {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Position of a '#' that starts a comment (outside quotes), or npos.
std::size_t comment_start(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (quoted && line[i] == '\\') {
      ++i;
    } else if (line[i] == '"') {
      quoted = !quoted;
    } else if (!quoted && line[i] == '#') {
      return i;
    }
  }
  return std::string_view::npos;
}

bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  for (char c : key) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  }
  return true;
}

std::string unquote(const std::string& raw, const std::string& where) {
  if (raw.size() < 2 || raw.front() != '"' || raw.back() != '"') throw ValidationError(where + ": expected a quoted string");
  std::string out;
  for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
    char c = raw[i];
    if (c == '\\') {
      if (i + 2 >= raw.size()) throw ValidationError(where + ": dangling escape");
      c = raw[++i];
      switch (c) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: throw ValidationError(where + ": unknown escape \\" + std::string(1, c));
      }
    } else if (c == '"') {
      throw ValidationError(where + ": unescaped quote inside string");
    } else {
      out += c;
    }
  }
  return out;
}

std::vector<std::string> split_array(const std::string& raw, const std::string& where) {
  if (raw.size() < 2 || raw.front() != '[' || raw.back() != ']') throw ValidationError(where + ": expected an array");
  std::vector<std::string> items;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
    const char c = raw[i];
    if (quoted && c == '\\' && i + 2 < raw.size()) {
      cur += c;
      cur += raw[++i];
      continue;
    }
    if (c == '"') quoted = !quoted;
    if (c == ',' && !quoted) {
      items.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw ValidationError(where + ": unterminated string in array");
  const std::string last = trim(cur);
  if (!last.empty()) items.push_back(last);
  for (const auto& item : items) {
    if (item.empty()) throw ValidationError(where + ": empty array element");
  }
  return items;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) throw ValidationError(where + ": expected a number, got '" + s + "'");
  return v;
}

template <typename T>
T parse_integer(const std::string& s, const std::string& where) {
  T v{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ValidationError(where + ": expected an integer, got '" + s + "'");
  return v;
}

}  // namespace

Config Config::parse(std::string_view text, const std::string& source) {
  Config cfg;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
    const std::string where = source + ":" + std::to_string(line_no);
    const auto hash = comment_start(line);
    const std::string body = trim(hash == std::string_view::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') throw ValidationError(where + ": malformed section header");
      section = trim(std::string_view(body).substr(1, body.size() - 2));
      if (!valid_key(section)) throw ValidationError(where + ": invalid section name");
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ValidationError(where + ": expected key = value");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (!valid_key(key)) throw ValidationError(where + ": invalid key '" + key + "'");
    if (value.empty()) throw ValidationError(where + ": missing value for '" + key + "'");
    // Catch malformed strings and arrays here rather than at first use.
    if (value.front() == '"') unquote(value, where);
    if (value.front() == '[') {
      for (const auto& item : split_array(value, where)) {
        if (item.front() == '"') unquote(item, where);
      }
    }
    const std::string full = section.empty() ? key : section + "." + key;
    if (!cfg.values_.emplace(full, Value{value, where}).second) throw ValidationError(where + ": duplicate key '" + full + "'");
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse(std::string_view(bytes.data(), bytes.size()), path.string());
}

const Config::Value* Config::find(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  consumed_.insert(key);
  return &it->second;
}

bool Config::has(const std::string& key) const { return values_.count(key) != 0; }

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const Value* v = find(key);
  return v ? unquote(v->raw, v->where) : fallback;
}

double Config::get_double(const std::string& key, double fallback) const {
  const Value* v = find(key);
  return v ? parse_double(v->raw, v->where) : fallback;
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
  const Value* v = find(key);
  return v ? parse_integer<std::int64_t>(v->raw, v->where) : fallback;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  const Value* v = find(key);
  return v ? parse_integer<std::uint64_t>(v->raw, v->where) : fallback;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  if (v->raw == "true") return true;
  if (v->raw == "false") return false;
  throw ValidationError(v->where + ": expected true or false");
}

std::vector<std::string> Config::get_strings(const std::string& key, const std::vector<std::string>& fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  std::vector<std::string> out;
  for (const auto& item : split_array(v->raw, v->where)) out.push_back(unquote(item, v->where));
  return out;
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const auto& item : split_array(v->raw, v->where)) out.push_back(parse_double(item, v->where));
  return out;
}

std::vector<int> Config::get_ints(const std::string& key, const std::vector<int>& fallback) const {
  const Value* v = find(key);
  if (!v) return fallback;
  std::vector<int> out;
  for (const auto& item : split_array(v->raw, v->where)) out.push_back(parse_integer<int>(item, v->where));
  return out;
}

void Config::set(const std::string& key, const std::string& raw) {
  if (!valid_key(key)) throw ValidationError("invalid config key '" + key + "'");
  values_[key] = Value{trim(raw), "override " + key};
}

std::vector<std::string> Config::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) out.push_back(k);
  return out;
}

void Config::require_consumed() const {
  std::string unknown;
  for (const auto& [k, v] : values_) {
    if (consumed_.count(k)) continue;
    unknown += (unknown.empty() ? "" : ", ") + k + " (" + v.where + ")";
  }
  if (!unknown.empty()) throw ValidationError("unknown config keys: " + unknown);
}

}  // namespace attnmask
