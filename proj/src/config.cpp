#include "flowfusion/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "flowfusion/error.hpp"

namespace flowfusion {

namespace {

std::string strip(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = strip(line);
    if (body.empty() || body[0] == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + body + "'", line_no);
    const std::string key = strip(body.substr(0, eq));
    const std::string value = strip(body.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key", line_no);
    if (cfg.entries_.count(key)) throw ConfigError("duplicate key '" + key + "'", line_no);
    cfg.entries_[key] = {value, line_no};
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    entries_[key] = {value, 0};
  } else {
    it->second.value = value;
  }
}

const KeyValueConfig::Entry& KeyValueConfig::entry(const std::string& key) const {
  used_[key] = true;
  return entries_.at(key);
}

int KeyValueConfig::line_of(const std::string& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? 0 : it->second.line;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  if (!has(key)) return fallback;
  return entry(key).value;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  const auto& e = entry(key);
  double v = 0.0;
  std::istringstream is(e.value);
  std::string rest;
  if (!(is >> v) || (is >> rest)) throw ConfigError("'" + key + "' expects a number, got '" + e.value + "'", e.line);
  return v;
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
  if (!has(key)) return fallback;
  const auto& e = entry(key);
  int v = 0;
  const auto* first = e.value.data();
  const auto* last = first + e.value.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError("'" + key + "' expects an integer, got '" + e.value + "'", e.line);
  }
  return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const auto& e = entry(key);
  if (e.value == "1" || e.value == "true" || e.value == "yes" || e.value == "on") return true;
  if (e.value == "0" || e.value == "false" || e.value == "no" || e.value == "off") return false;
  throw ConfigError("'" + key + "' expects a boolean, got '" + e.value + "'", e.line);
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key, std::size_t count) const {
  const auto& e = entry(key);
  std::istringstream is(e.value);
  std::vector<double> out;
  double v;
  while (is >> v) out.push_back(v);
  if (!is.eof() || out.size() != count) {
    throw ConfigError("'" + key + "' expects " + std::to_string(count) + " numbers, got '" + e.value + "'", e.line);
  }
  return out;
}

std::vector<std::string> KeyValueConfig::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, e] : entries_) {
    if (!used_.count(k)) out.push_back(k);
  }
  return out;
}

std::vector<std::string> KeyValueConfig::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [k, e] : entries_) {
    if (k.rfind(prefix, 0) == 0) out.push_back(k);
  }
  return out;
}

std::string KeyValueConfig::dump() const {
  std::string out;
  for (const auto& [k, e] : entries_) out += k + "=" + e.value + "\n";
  return out;
}

}  // namespace flowfusion
