#include "shrimpmorph/kv_config.hpp"

#include <charconv>
#include <sstream>

#include "shrimpmorph/data_io.hpp"
#include "shrimpmorph/errors.hpp"

namespace shrimpmorph {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError("config key '" + key + "': '" + text + "' is not a valid number");
  }
  return value;
}

}  // namespace

std::optional<std::string> KvConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  const auto v = get(key);
  return v ? parse_number<double>(key, *v) : fallback;
}

std::int64_t KvConfig::get_int(const std::string& key, std::int64_t fallback) const {
  const auto v = get(key);
  return v ? parse_number<std::int64_t>(key, *v) : fallback;
}

std::uint64_t KvConfig::get_uint(const std::string& key, std::uint64_t fallback) const {
  const auto v = get(key);
  return v ? parse_number<std::uint64_t>(key, *v) : fallback;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ParseError("config key '" + key + "': '" + *v + "' is not a boolean");
}

KvConfig parse_kv_config(const std::string& text) {
  std::map<std::string, std::string> values;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(line_no);
    if (eq == std::string::npos) throw ParseError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(where + ": empty key");
    if (!values.emplace(key, trim(line.substr(eq + 1))).second) {
      throw ParseError(where + ": duplicate key '" + key + "'");
    }
  }
  return KvConfig(std::move(values));
}

KvConfig load_kv_config(const std::filesystem::path& path) {
  return parse_kv_config(read_text_file(path));
}

}  // namespace shrimpmorph
