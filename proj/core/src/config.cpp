#include "simsec/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "simsec/errors.hpp"
#include "yaml_fields.hpp"

namespace simsec {

double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double watt_to_dbm(double watt) { return 10.0 * std::log10(watt) + 30.0; }

double SystemConfig::thermal_noise_w() const noexcept {
  return dbm_to_watt(noise_psd_dbm_hz + 10.0 * std::log10(bandwidth_hz));
}

double SystemConfig::noise_power(std::size_t k) const {
  if (k >= users) throw std::out_of_range("noise_power: user index");
  return user_noise_w.empty() ? thermal_noise_w() : user_noise_w[k];
}

double SystemConfig::eve_noise_power() const { return eve_noise_w.value_or(thermal_noise_w()); }

double SystemConfig::weight(std::size_t k) const {
  if (k >= users) throw std::out_of_range("weight: user index");
  return weights.empty() ? 1.0 : weights[k];
}

void SystemConfig::validate() const {
  if (users == 0) throw ConfigError("users must be at least 1");
  if (antennas != users) {
    throw ConfigError("antennas (L=" + std::to_string(antennas) + ") must equal users (K=" +
                      std::to_string(users) + "): one stream per antenna");
  }
  if (layers == 0) throw ConfigError("layers must be at least 1");
  if (atoms_x == 0 || atoms_y == 0) throw ConfigError("atoms_x and atoms_y must be at least 1");
  if (bits && (*bits < 1 || *bits > 16)) throw ConfigError("bits must be in 1..16 or continuous");
  if (!(carrier_hz > 0.0) || !std::isfinite(carrier_hz)) throw ConfigError("carrier frequency must be positive");
  if (!(bandwidth_hz > 0.0)) throw ConfigError("bandwidth must be positive");
  if (!(total_power_w > 0.0) || !std::isfinite(total_power_w)) throw ConfigError("total power must be positive");
  if (!(reference_distance_m > 0.0)) throw ConfigError("reference distance must be positive");
  if (!std::isfinite(pathloss_exponent)) throw ConfigError("path-loss exponent must be finite");
  if (sim_thickness_m && !(*sim_thickness_m > 0.0)) throw ConfigError("SIM thickness must be positive");
  if (!(cluster_radius_m >= 0.0) || !(cluster_distance_m >= 0.0)) {
    throw ConfigError("cluster geometry must be non-negative");
  }
  if (!weights.empty()) {
    if (weights.size() != users) throw ConfigError("weights must have one entry per user");
    for (double w : weights)
      if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("weights must lie in [0, 1]");
  }
  if (!qos_min_bps_hz.empty() && qos_min_bps_hz.size() != users) {
    throw ConfigError("qos thresholds must have one entry per user");
  }
  if (!user_noise_w.empty()) {
    if (user_noise_w.size() != users) throw ConfigError("user noise must have one entry per user");
    for (double s : user_noise_w)
      if (!(s > 0.0)) throw ConfigError("noise powers must be positive");
  }
  if (eve_noise_w && !(*eve_noise_w > 0.0)) throw ConfigError("eavesdropper noise must be positive");
}

double parse_power(const std::string& text) {
  std::istringstream in(text);
  double value = 0.0;
  std::string unit;
  if (!(in >> value)) throw ConfigError("cannot parse power '" + text + "'");
  in >> unit;
  std::string rest;
  if (in >> rest) throw ConfigError("trailing text in power '" + text + "'");
  if (unit == "W") return value;
  if (unit == "mW") return value * 1e-3;
  if (unit == "dBm") return dbm_to_watt(value);
  if (unit.empty()) throw ConfigError("power '" + text + "' needs a unit suffix (W, mW or dBm)");
  throw ConfigError("unknown power unit '" + unit + "'");
}

namespace detail {

namespace {

double parse_psd(const std::string& text) {
  std::istringstream in(text);
  double value = 0.0;
  std::string unit;
  if (!(in >> value)) throw ConfigError("cannot parse noise PSD '" + text + "'");
  in >> unit;
  if (unit != "dBm/Hz") throw ConfigError("noise PSD '" + text + "' must be given in dBm/Hz");
  return value;
}

}  // namespace

void read_system_config(const YAML::Node& node, SystemConfig& cfg) {
  FieldReader r(node, "scenario");
  r.read("antennas", cfg.antennas);
  r.read("users", cfg.users);
  r.read("layers", cfg.layers);
  r.read("atoms_x", cfg.atoms_x);
  r.read("atoms_y", cfg.atoms_y);
  if (auto b = r.get("bits")) {
    const auto s = b.as<std::string>();
    if (s == "continuous") {
      cfg.bits.reset();
    } else {
      try {
        cfg.bits = b.as<int>();
      } catch (const YAML::Exception&) {
        throw ConfigError("scenario.bits must be an integer or 'continuous'");
      }
    }
  }
  r.read("carrier_frequency", cfg.carrier_hz);
  r.read("bandwidth", cfg.bandwidth_hz);
  if (auto v = r.get("noise_psd")) cfg.noise_psd_dbm_hz = parse_psd(v.as<std::string>());
  if (auto v = r.get("total_power")) cfg.total_power_w = parse_power(v.as<std::string>());
  r.read("pathloss_exponent", cfg.pathloss_exponent);
  r.read("reference_distance", cfg.reference_distance_m);
  r.read_optional("sim_thickness", cfg.sim_thickness_m);
  r.read("bs_height", cfg.bs_height_m);
  r.read("user_height", cfg.user_height_m);
  r.read("eve_height", cfg.eve_height_m);
  r.read("cluster_distance", cfg.cluster_distance_m);
  r.read("cluster_radius", cfg.cluster_radius_m);
  r.read_list("weights", cfg.weights);
  r.read_list("qos_min", cfg.qos_min_bps_hz);
  if (auto v = r.get("user_noise")) {
    if (!v.IsSequence()) throw ConfigError("scenario.user_noise must be a list");
    cfg.user_noise_w.clear();
    for (const auto& item : v) cfg.user_noise_w.push_back(parse_power(item.as<std::string>()));
  }
  if (auto v = r.get("eve_noise")) cfg.eve_noise_w = parse_power(v.as<std::string>());
  r.finish();
  cfg.validate();
}

}  // namespace detail

SystemConfig system_config_from_string(const std::string& yaml_text) {
  const YAML::Node root = detail::load_yaml_text(yaml_text);
  SystemConfig cfg;
  const YAML::Node section =
      root && root.IsMap() ? root["scenario"] : YAML::Node(YAML::NodeType::Undefined);
  detail::read_system_config(section, cfg);
  return cfg;
}

SystemConfig load_system_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return system_config_from_string(text.str());
}

}  // namespace simsec
