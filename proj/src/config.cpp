#include "cowdiff/config.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "cowdiff/text_util.hpp"

namespace cowdiff {

KeyValueConfig::KeyValueConfig(std::set<std::string> allowed_keys)
    : allowed_(std::move(allowed_keys)) {}

void KeyValueConfig::check_key(const std::string& key) const {
  if (key.empty()) throw std::invalid_argument("config: empty key");
  if (!allowed_.empty() && allowed_.count(key) == 0) {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

void KeyValueConfig::parse(std::istream& in, const std::string& source) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view body = trim(strip_comment(line));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument(source + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key(trim(body.substr(0, eq)));
    const std::string value(trim(body.substr(eq + 1)));
    try {
      set(key, value);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  parse(in, path);
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  check_key(key);
  values_[key] = value;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

namespace {

template <typename F>
auto convert(const std::string& key, const std::string& text, F parse) {
  try {
    return parse(text);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("config key '" + key + "': " + e.what());
  }
}

}  // namespace

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  return convert(key, it->second, [](const std::string& s) { return parse_double(s); });
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  return convert(key, it->second, [](const std::string& s) { return parse_int(s); });
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const long long v = convert(key, it->second, [](const std::string& s) { return parse_int64(s); });
  if (v < 0) throw std::invalid_argument("config key '" + key + "': must be non-negative");
  return static_cast<std::uint64_t>(v);
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  return convert(key, it->second, [](const std::string& s) { return parse_bool(s); });
}

std::vector<int> KeyValueConfig::get_int_list(const std::string& key,
                                              const std::vector<int>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  return convert(key, it->second, [](const std::string& s) { return parse_int_list(s); });
}

void KeyValueConfig::write(std::ostream& out) const {
  for (const auto& [k, v] : values_) out << k << '=' << v << '\n';
}

}  // namespace cowdiff
