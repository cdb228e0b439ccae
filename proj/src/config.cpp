#include "ionfb/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace ionfb {

namespace {

std::string trim(const std::string& s) {
  auto begin = std::find_if_not(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
  auto end = std::find_if_not(s.rbegin(), s.rend(), [](unsigned char c) { return std::isspace(c); });
  if (begin >= end.base()) return {};
  return std::string(begin, end.base());
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in) {
  KeyValueConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kConfig, "line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw Error(ErrorKind::kConfig, "line " + std::to_string(line_no) + ": empty key");
    }
    if (cfg.values_.count(key)) {
      throw Error(ErrorKind::kConfig, "line " + std::to_string(line_no) + ": duplicate key " + key);
    }
    cfg.values_[key] = value;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kConfig, "cannot open config file " + path);
  return parse(in);
}

std::optional<double> KeyValueConfig::get_double(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  std::istringstream is(it->second);
  double v = 0.0;
  is >> v;
  if (!is || !(is >> std::ws).eof()) {
    throw Error(ErrorKind::kConfig, "key " + key + ": not a number: '" + it->second + "'");
  }
  return v;
}

std::optional<std::string> KeyValueConfig::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

bool has_physical_keys(const KeyValueConfig& cfg) {
  for (const char* k : {"omega", "delta_l", "gamma", "nu_t", "chi"}) {
    if (cfg.contains(k)) return true;
  }
  return false;
}

PhysicalParams physical_params_from(const KeyValueConfig& cfg, PhysicalParams p) {
  if (auto v = cfg.get_double("omega")) p.rabi_frequency = *v;
  if (auto v = cfg.get_double("delta_l")) p.laser_detuning = *v;
  if (auto v = cfg.get_double("gamma")) p.linewidth = *v;
  if (auto v = cfg.get_double("epsilon")) p.solid_angle_fraction = *v;
  if (auto v = cfg.get_double("eta")) p.lamb_dicke = *v;
  if (auto v = cfg.get_double("chi")) p.laser_angle = *v;
  if (auto v = cfg.get_double("alpha")) p.dipole_alpha = *v;
  if (auto v = cfg.get_double("nu_t")) p.trap_frequency = *v;
  return p;
}

}  // namespace ionfb
