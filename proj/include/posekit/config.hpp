#pragma once

// Flat key = value configuration. '#' starts a comment; blank lines are
// ignored; keys are unique.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "posekit/io/text.hpp"

namespace posekit {

class Config {
 public:
  Config() = default;

  static Config parse(std::string_view text, const std::string& source = "<memory>") {
    Config c;
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      const std::size_t line_start = pos;
      std::string_view line = text.substr(pos, end - pos);
      pos = end == text.size() ? end : end + 1;
      if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ParseError(source, line_start, "expected key = value");
      const std::string key(trim(line.substr(0, eq)));
      if (key.empty()) throw ParseError(source, line_start, "empty key");
      if (c.values_.contains(key)) throw ParseError(source, line_start, "duplicate key '" + key + "'");
      c.values_[key] = std::string(trim(line.substr(eq + 1)));
    }
    return c;
  }

  static Config load(const std::filesystem::path& path) { return parse(io::read_file(path), path.string()); }

  bool contains(const std::string& key) const { return values_.contains(key); }

  std::optional<std::string> get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<double> get_double(const std::string& key) const {
    const auto v = get(key);
    if (!v) return std::nullopt;
    const auto d = io::parse_double(*v);
    if (!d) throw DataError("config key '" + key + "' is not a number: " + *v);
    return d;
  }

  std::optional<long> get_long(const std::string& key) const {
    const auto v = get(key);
    if (!v) return std::nullopt;
    const auto d = io::parse_long(*v);
    if (!d) throw DataError("config key '" + key + "' is not an integer: " + *v);
    return d;
  }

  // Keys outside `known`, for reporting typos.
  std::set<std::string> unknown_keys(const std::set<std::string>& known) const {
    std::set<std::string> out;
    for (const auto& [k, v] : values_)
      if (!known.contains(k)) out.insert(k);
    return out;
  }

 private:
  static std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  }

  std::map<std::string, std::string> values_;
};

// Flag value if given, else config value, else the default.
template <class T>
T resolve(bool flag_given, T flag_value, std::optional<T> config_value, T fallback) {
  if (flag_given) return flag_value;
  if (config_value) return *config_value;
  return fallback;
}

}  // namespace posekit
