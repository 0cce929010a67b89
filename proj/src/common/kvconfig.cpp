#include "common/kvconfig.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "common/errors.hpp"

namespace ctae {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(s);
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  if (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

int64_t parse_int(const std::string& v, const std::string& key) {
  int64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    fail(ErrorKind::config, "config key '" + key + "': expected integer, got '" + v + "'");
  return x;
}

double parse_dbl(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    fail(ErrorKind::config, "config key '" + key + "': expected number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(ErrorKind::config, "config key '" + key + "': expected bool, got '" + v + "'");
}

}  // namespace

KvConfig KvConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str(), path);
}

KvConfig KvConfig::from_string(const std::string& text, const std::string& origin) {
  KvConfig cfg;
  cfg.origin_ = origin;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line = line.substr(0, h);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::config, origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      fail(ErrorKind::config, origin + ":" + std::to_string(lineno) + ": empty key");
    if (cfg.entries_.count(key))
      fail(ErrorKind::config, origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    cfg.entries_[key] = value;
  }
  return cfg;
}

bool KvConfig::has(const std::string& key) const { return entries_.count(key) != 0; }

std::string KvConfig::raw(const std::string& key) {
  auto it = entries_.find(key);
  if (it == entries_.end())
    fail(ErrorKind::config, origin_ + ": missing required key '" + key + "'");
  consumed_.insert(key);
  return it->second;
}

std::string KvConfig::get_string(const std::string& key) { return raw(key); }
std::string KvConfig::get_string(const std::string& key, const std::string& def) {
  return has(key) ? raw(key) : def;
}
int64_t KvConfig::get_int(const std::string& key) { return parse_int(raw(key), key); }
int64_t KvConfig::get_int(const std::string& key, int64_t def) {
  return has(key) ? get_int(key) : def;
}
double KvConfig::get_double(const std::string& key) { return parse_dbl(raw(key), key); }
double KvConfig::get_double(const std::string& key, double def) {
  return has(key) ? get_double(key) : def;
}
bool KvConfig::get_bool(const std::string& key) { return parse_bool(raw(key), key); }
bool KvConfig::get_bool(const std::string& key, bool def) {
  return has(key) ? get_bool(key) : def;
}

std::vector<int64_t> KvConfig::get_int_list(const std::string& key) {
  std::vector<int64_t> out;
  for (const auto& item : split_list(raw(key))) out.push_back(parse_int(item, key));
  return out;
}
std::vector<int64_t> KvConfig::get_int_list(const std::string& key, const std::vector<int64_t>& def) {
  return has(key) ? get_int_list(key) : def;
}
std::vector<double> KvConfig::get_double_list(const std::string& key) {
  std::vector<double> out;
  for (const auto& item : split_list(raw(key))) out.push_back(parse_dbl(item, key));
  return out;
}
std::vector<double> KvConfig::get_double_list(const std::string& key, const std::vector<double>& def) {
  return has(key) ? get_double_list(key) : def;
}
std::vector<std::string> KvConfig::get_string_list(const std::string& key) {
  return split_list(raw(key));
}
std::vector<std::string> KvConfig::get_string_list(const std::string& key,
                                                   const std::vector<std::string>& def) {
  return has(key) ? get_string_list(key) : def;
}

void KvConfig::set(const std::string& key, const std::string& value) {
  entries_[key] = value;
}

void KvConfig::finish() const {
  for (const auto& [key, value] : entries_) {
    (void)value;
    if (!consumed_.count(key))
      fail(ErrorKind::config, origin_ + ": unknown key '" + key + "'");
  }
}

std::string KvConfig::canonical_text() const {
  std::string out;
  for (const auto& [key, value] : entries_) {
    out += key;
    out += " = ";
    out += value;
    out += "\n";
  }
  return out;
}

}  // namespace ctae
