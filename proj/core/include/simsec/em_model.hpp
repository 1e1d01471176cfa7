#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "simsec/config.hpp"
#include "simsec/linalg.hpp"
#include "simsec/rng.hpp"

namespace simsec::em {

using linalg::CMatrix;
using linalg::Complex;
using linalg::CVector;

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

[[nodiscard]] double distance(const Point3& a, const Point3& b) noexcept;

/// Pairwise link between two radiating elements on parallel planes.
struct Link {
  double distance = 0.0;
  double cos_obliquity = 1.0;  // axial separation / distance
};

/// Physical layout of the stacked metasurface. Layers are parallel to the xy
/// plane; layer m (0-based) sits at z = (m + 1)·d_layer and the antenna array
/// at z = 0.
struct SimGeometry {
  double wavelength = 0.0;
  double pitch = 0.0;  // λ/2, both in-layer and along the antenna array
  double element_area = 0.0;
  double layer_spacing = 0.0;
  std::size_t atoms_x = 0;
  std::size_t atoms_y = 0;
  std::size_t layers = 0;

  std::vector<Point3> atom_xy;           // index n = ix·atoms_y + iy, z = 0
  std::vector<Point3> antenna_positions;

  [[nodiscard]] std::size_t atoms() const noexcept { return atom_xy.size(); }
  [[nodiscard]] std::size_t antennas() const noexcept { return antenna_positions.size(); }
  [[nodiscard]] Point3 atom(std::size_t layer, std::size_t n) const;
  /// Link from atom `from` on layer m−1 to atom `to` on layer m (m ≥ 1).
  [[nodiscard]] Link inter_layer_link(std::size_t to, std::size_t from) const;
  /// Link from antenna l to atom n of the first layer.
  [[nodiscard]] Link antenna_link(std::size_t n, std::size_t l) const;
};

[[nodiscard]] SimGeometry build_geometry(const SystemConfig& cfg);

/// Rayleigh–Sommerfeld transmission coefficient between two meta-atoms:
/// (A cosχ / d)(1/(2πd) − j/λ) e^{j2πd/λ}.
[[nodiscard]] Complex diffraction_coeff(double element_area, double distance, double cos_chi,
                                        double wavelength);

/// Fixed inter-layer propagation: `first` is W_1 (N×L), `inter[m-1]` is W_{m+1}
/// (N×N) for the hop into layer m+1.
struct PropagationSet {
  CMatrix first;
  std::vector<CMatrix> inter;

  [[nodiscard]] std::size_t layers() const noexcept { return inter.size() + 1; }
  [[nodiscard]] std::size_t atoms() const noexcept { return first.rows(); }
  [[nodiscard]] std::size_t antennas() const noexcept { return first.cols(); }
};

[[nodiscard]] PropagationSet build_propagation(const SimGeometry& geom);

/// Normalized sinc, sin(πx)/(πx).
[[nodiscard]] double sinc(double x) noexcept;

struct CorrelationModel {
  CMatrix r;     // real symmetric, unit diagonal
  CMatrix sqrt;  // Hermitian square root of r
  std::vector<double> distances;  // N×N, row-major
};

[[nodiscard]] CorrelationModel build_correlation(const SimGeometry& geom);

/// β = C0 (d/d0)^ϖ with C0 = (λ / 4π d0)². Requires d > d0.
[[nodiscard]] double path_loss(const SystemConfig& cfg, double distance_m);

struct ChannelSet {
  std::vector<CVector> users;  // h_SIM,k
  CVector eve;                 // h_SIM,e
  std::vector<double> user_gain;  // β_SIM,k
  double eve_gain = 0.0;
  std::vector<Point3> user_positions;
  Point3 eve_position;
  Point3 bs_position;
};

/// Draws user positions (area-uniform in the cluster disc) and correlated
/// Rayleigh channels h = √β R^{1/2} z.
[[nodiscard]] ChannelSet sample_scenario(const SystemConfig& cfg, const CorrelationModel& corr,
                                         SeededRng& rng);

/// Layer-major phase shifts φ_m^n in [0, 2π).
class PhaseTensor {
 public:
  PhaseTensor() = default;
  PhaseTensor(std::size_t layers, std::size_t atoms);
  /// Wraps every value into [0, 2π).
  PhaseTensor(std::size_t layers, std::size_t atoms, std::vector<double> values);

  static PhaseTensor random(std::size_t layers, std::size_t atoms, SeededRng& rng);

  [[nodiscard]] std::size_t layers() const noexcept { return layers_; }
  [[nodiscard]] std::size_t atoms() const noexcept { return atoms_; }
  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

  [[nodiscard]] double operator()(std::size_t m, std::size_t n) const noexcept {
    return values_[m * atoms_ + n];
  }
  /// Stores wrap(value).
  void set(std::size_t m, std::size_t n, double value);

  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] std::span<const double> layer(std::size_t m) const noexcept {
    return {values_.data() + m * atoms_, atoms_};
  }
  /// e^{jφ_m^n} for one layer.
  [[nodiscard]] std::vector<Complex> unit_diagonal(std::size_t m) const;

  [[nodiscard]] bool quantized() const noexcept { return indices_.has_value(); }
  [[nodiscard]] const std::optional<std::vector<int>>& indices() const noexcept {
    return indices_;
  }
  void mark_quantized(std::vector<int> indices);
  void clear_quantized() noexcept { indices_.reset(); }

  friend bool operator==(const PhaseTensor&, const PhaseTensor&) = default;

 private:
  std::size_t layers_ = 0;
  std::size_t atoms_ = 0;
  std::vector<double> values_;
  std::optional<std::vector<int>> indices_;
};

/// Maps any real angle into [0, 2π).
[[nodiscard]] double wrap_phase(double phi) noexcept;

/// G = Φ_M W_M ⋯ Φ_2 W_2 Φ_1, formed with M−1 dense N×N products.
[[nodiscard]] CMatrix compose_G(const PhaseTensor& phases, const PropagationSet& prop);

struct CompositeChannels {
  std::vector<CVector> users;  // h_k = W_1^H G^H h_SIM,k  (length L)
  CVector eve;
};

[[nodiscard]] CompositeChannels composite_channel(const ChannelSet& chs, const CMatrix& g,
                                                  const PropagationSet& prop);

/// Everything fixed for one array configuration.
struct SimSystem {
  SystemConfig cfg;
  SimGeometry geometry;
  PropagationSet propagation;
  CorrelationModel correlation;
};

[[nodiscard]] SimSystem build_system(const SystemConfig& cfg);

}  // namespace simsec::em
