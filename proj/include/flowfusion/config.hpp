#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace flowfusion {

/// Flat "section.key=value" text configuration. '#' starts a comment line.
/// Keys keep the line they came from so errors can point at it.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  /// Later writes win; used for flag overrides.
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Whitespace-separated numbers; throws ConfigError unless exactly `count` parse.
  std::vector<double> get_doubles(const std::string& key, std::size_t count) const;
  int line_of(const std::string& key) const;

  /// Keys that were never read through a getter; lets callers reject typos.
  std::vector<std::string> unused_keys() const;
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  /// Sorted "key=value" lines.
  std::string dump() const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };
  const Entry& entry(const std::string& key) const;

  std::map<std::string, Entry> entries_;
  mutable std::map<std::string, bool> used_;
};

}  // namespace flowfusion
