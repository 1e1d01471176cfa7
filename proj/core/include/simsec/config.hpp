#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace simsec {

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s

/// Scenario constants. Defaults reproduce the reference 28 GHz deployment:
/// BS at 15 m height, users scattered in a 10 m disc 30 m away, eavesdropper
/// at the cluster center.
struct SystemConfig {
  std::size_t antennas = 4;  // L
  std::size_t users = 4;     // K
  std::size_t layers = 4;    // M
  std::size_t atoms_x = 8;
  std::size_t atoms_y = 8;
  std::optional<int> bits;  // nullopt: continuous phases

  double carrier_hz = 28e9;
  double bandwidth_hz = 10e6;
  double noise_psd_dbm_hz = -174.0;
  double total_power_w = 1.0;
  double pathloss_exponent = -3.5;
  double reference_distance_m = 1.0;
  std::optional<double> sim_thickness_m;  // defaults to 5 wavelengths

  double bs_height_m = 15.0;
  double user_height_m = 1.65;
  double eve_height_m = 1.65;
  double cluster_distance_m = 30.0;
  double cluster_radius_m = 10.0;

  std::vector<double> weights;        // η_k; empty means all ones
  std::vector<double> qos_min_bps_hz;  // γ_k^min; empty means unconstrained
  std::vector<double> user_noise_w;    // σ_k²; empty means derived from PSD
  std::optional<double> eve_noise_w;   // σ_e²

  /// Throws ConfigError on any violated invariant.
  void validate() const;

  [[nodiscard]] std::size_t atoms() const noexcept { return atoms_x * atoms_y; }
  [[nodiscard]] double wavelength() const noexcept { return kSpeedOfLight / carrier_hz; }
  [[nodiscard]] double thickness() const noexcept {
    return sim_thickness_m.value_or(5.0 * wavelength());
  }
  [[nodiscard]] double layer_spacing() const noexcept {
    return thickness() / static_cast<double>(layers);
  }
  /// PSD integrated over the bandwidth, in W.
  [[nodiscard]] double thermal_noise_w() const noexcept;
  [[nodiscard]] double noise_power(std::size_t k) const;
  [[nodiscard]] double eve_noise_power() const;
  [[nodiscard]] double weight(std::size_t k) const;
};

[[nodiscard]] double dbm_to_watt(double dbm);
[[nodiscard]] double watt_to_dbm(double watt);

/// Parses "<number> W", "<number> mW" or "<number> dBm". A bare number is
/// rejected: powers must carry a unit.
[[nodiscard]] double parse_power(const std::string& text);

/// Reads the `scenario:` section of a YAML config. Missing keys keep their
/// defaults; unknown keys are rejected.
[[nodiscard]] SystemConfig load_system_config(const std::filesystem::path& path);
[[nodiscard]] SystemConfig system_config_from_string(const std::string& yaml_text);

}  // namespace simsec
