#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "ionfb/params.hpp"

namespace ionfb {

/// Flat `key = value` configuration. Blank lines and `#` comments are ignored;
/// duplicate keys are rejected.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in);
  static KeyValueConfig load(const std::string& path);

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<double> get_double(const std::string& key) const;
  std::optional<std::string> get_string(const std::string& key) const;
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// True when any of the raw physical keys (omega, delta_l, gamma, nu_t, chi) is present.
bool has_physical_keys(const KeyValueConfig& cfg);

/// Applies physical keys (omega, delta_l, gamma, epsilon, eta, chi, alpha, nu_t)
/// on top of `base`.
PhysicalParams physical_params_from(const KeyValueConfig& cfg, PhysicalParams base = {});

}  // namespace ionfb
