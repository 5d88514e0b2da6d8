#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace teamlab::cfg {

// Flat key=value text config. '#' starts a comment, blank lines are skipped.
// Typed getters record which keys were consumed so callers can reject typos
// via ensure_all_consumed().
class KeyValues {
 public:
  KeyValues() = default;
  static KeyValues from_file(const std::string& path);
  static KeyValues from_string(const std::string& text);

  // CLI-style override, "key=value".
  void set(const std::string& key, const std::string& value);
  void apply_override(const std::string& assignment);

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  long get_int(const std::string& key, long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Throws listing every key that no getter ever touched.
  void ensure_all_consumed() const;

  // Deterministic "key=value" lines of everything parsed, for manifests.
  std::vector<std::string> lines() const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> consumed_;

  const std::string* find(const std::string& key) const;
};

long parse_int(const std::string& text, const std::string& what);
double parse_double(const std::string& text, const std::string& what);
bool parse_bool(const std::string& text, const std::string& what);

}  // namespace teamlab::cfg
