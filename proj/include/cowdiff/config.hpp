#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace cowdiff {

/// Flat key=value configuration. Blank lines and '#' comments are ignored;
/// keys outside the allowed set are rejected.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;
  explicit KeyValueConfig(std::set<std::string> allowed_keys);

  /// Merges lines from `in`; later values override earlier ones.
  void parse(std::istream& in, const std::string& source = "<config>");
  void load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) != 0; }

  [[nodiscard]] std::string get_string(const std::string& key, const std::string& fallback) const;
  [[nodiscard]] double get_double(const std::string& key, double fallback) const;
  [[nodiscard]] int get_int(const std::string& key, int fallback) const;
  [[nodiscard]] std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  [[nodiscard]] bool get_bool(const std::string& key, bool fallback) const;
  [[nodiscard]] std::vector<int> get_int_list(const std::string& key,
                                              const std::vector<int>& fallback) const;

  [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }

  /// Sorted key=value lines.
  void write(std::ostream& out) const;

 private:
  void check_key(const std::string& key) const;

  std::set<std::string> allowed_;
  std::map<std::string, std::string> values_;
};

}  // namespace cowdiff
