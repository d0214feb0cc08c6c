#pragma once

// Flat `key = value` configuration text. `#` starts a comment; blank lines
// are skipped; keys are unique.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace shrimpmorph {

class KvConfig {
public:
  KvConfig() = default;
  explicit KvConfig(std::map<std::string, std::string> values) : values_(std::move(values)) {}

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;

  // Fallback when absent; ParseError when present but malformed.
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }

private:
  std::map<std::string, std::string> values_;
};

/// Throws ParseError naming the line.
KvConfig parse_kv_config(const std::string& text);
/// Throws IoError, ParseError.
KvConfig load_kv_config(const std::filesystem::path& path);

}  // namespace shrimpmorph
