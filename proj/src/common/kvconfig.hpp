#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace ctae {

// Flat `key = value` config file. '#' starts a comment. Every key must be
// consumed by a typed getter; finish() rejects anything left over, so a typo
// in a config file fails loudly instead of silently using a default.
class KvConfig {
 public:
  static KvConfig from_file(const std::string& path);
  static KvConfig from_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key);
  std::string get_string(const std::string& key, const std::string& def);
  int64_t get_int(const std::string& key);
  int64_t get_int(const std::string& key, int64_t def);
  double get_double(const std::string& key);
  double get_double(const std::string& key, double def);
  bool get_bool(const std::string& key);
  bool get_bool(const std::string& key, bool def);
  std::vector<int64_t> get_int_list(const std::string& key);
  std::vector<int64_t> get_int_list(const std::string& key, const std::vector<int64_t>& def);
  std::vector<double> get_double_list(const std::string& key);
  std::vector<double> get_double_list(const std::string& key, const std::vector<double>& def);
  std::vector<std::string> get_string_list(const std::string& key);
  std::vector<std::string> get_string_list(const std::string& key, const std::vector<std::string>& def);

  // Overwrites or inserts a key (used for CLI flag overrides).
  void set(const std::string& key, const std::string& value);

  // Throws on keys never consumed by a getter.
  void finish() const;

  // Sorted `key = value` lines of everything present; stable input for
  // hashing and for the config echo in manifests/checkpoints.
  std::string canonical_text() const;
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::string raw(const std::string& key);
  std::string origin_;
  std::map<std::string, std::string> entries_;
  std::set<std::string> consumed_;
};

}  // namespace ctae
