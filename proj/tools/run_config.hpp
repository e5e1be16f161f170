#pragma once

#include "hmfg/mfg.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmfg::cli {

// User-facing configuration error; the message names the key and the accepted range.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class KeyType { kInt, kReal, kText, kChoice, kFlag };

struct KeySpec {
  std::string key;  // "section.name"
  KeyType type;
  std::string fallback;
  double lo = 0, hi = 0;  // numeric range
  bool lo_open = false;
  std::vector<std::string> choices;
  std::string help;
};

const std::vector<KeySpec>& schema();
const KeySpec* find_key(const std::string& key);
// Human-readable accepted range of a key, e.g. "(0, inf)" or "one of {csv, binary, both}".
std::string expected(const KeySpec& k);

// Canonical key -> value text for every schema key. Equality of two configs is equality
// of this map.
class RunConfig {
 public:
  RunConfig();  // all defaults

  // Line-oriented INI text: [section] headers, key = value, ; or # comments.
  static RunConfig from_file(const std::string& path);
  static RunConfig from_text(const std::string& text, const std::string& origin = "<text>");

  // Overrides one key ("section.name"); validates the value.
  void set(const std::string& key, const std::string& value);
  const std::string& text(const std::string& key) const;
  double real(const std::string& key) const;
  int integer(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<double> real_list(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  std::string to_ini() const;
  bool operator==(const RunConfig& o) const { return values_ == o.values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Cross-key checks and the typed problem; throw ConfigError before any solve starts.
TorusGrid config_grid(const RunConfig& c);
Habitat config_habitat(const RunConfig& c);
CosineProfile config_profile(const RunConfig& c, const std::string& key);
Field config_density(const RunConfig& c, const TorusGrid& g);
MFGProblem config_problem(const RunConfig& c);

}  // namespace hmfg::cli
