#include "simsec/em_model.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "simsec/errors.hpp"

namespace simsec::em {

using std::numbers::pi;

double distance(const Point3& a, const Point3& b) noexcept {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

Point3 SimGeometry::atom(std::size_t layer, std::size_t n) const {
  Point3 p = atom_xy.at(n);
  p.z = static_cast<double>(layer + 1) * layer_spacing;
  return p;
}

Link SimGeometry::inter_layer_link(std::size_t to, std::size_t from) const {
  const Point3& a = atom_xy.at(to);
  const Point3& b = atom_xy.at(from);
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double d = std::sqrt(dx * dx + dy * dy + layer_spacing * layer_spacing);
  return {d, layer_spacing / d};
}

Link SimGeometry::antenna_link(std::size_t n, std::size_t l) const {
  const Point3& a = atom_xy.at(n);
  const Point3& b = antenna_positions.at(l);
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double d = std::sqrt(dx * dx + dy * dy + layer_spacing * layer_spacing);
  return {d, layer_spacing / d};
}

SimGeometry build_geometry(const SystemConfig& cfg) {
  cfg.validate();
  SimGeometry g;
  g.wavelength = cfg.wavelength();
  g.pitch = g.wavelength / 2.0;
  g.element_area = g.pitch * g.pitch;
  g.layer_spacing = cfg.layer_spacing();
  g.atoms_x = cfg.atoms_x;
  g.atoms_y = cfg.atoms_y;
  g.layers = cfg.layers;

  const double cx = (static_cast<double>(cfg.atoms_x) - 1.0) / 2.0;
  const double cy = (static_cast<double>(cfg.atoms_y) - 1.0) / 2.0;
  g.atom_xy.reserve(cfg.atoms());
  for (std::size_t ix = 0; ix < cfg.atoms_x; ++ix)
    for (std::size_t iy = 0; iy < cfg.atoms_y; ++iy)
      g.atom_xy.push_back({(static_cast<double>(ix) - cx) * g.pitch,
                           (static_cast<double>(iy) - cy) * g.pitch, 0.0});

  const double cl = (static_cast<double>(cfg.antennas) - 1.0) / 2.0;
  for (std::size_t l = 0; l < cfg.antennas; ++l)
    g.antenna_positions.push_back({(static_cast<double>(l) - cl) * g.pitch, 0.0, 0.0});
  return g;
}

Complex diffraction_coeff(double element_area, double d, double cos_chi, double wavelength) {
  if (!(d > 0.0)) throw NumericalError("diffraction_coeff: coincident elements (d = 0)");
  if (!(cos_chi > 0.0 && cos_chi <= 1.0)) {
    throw NumericalError("diffraction_coeff: obliquity cosine outside (0, 1]");
  }
  const double amplitude = element_area * cos_chi / d;
  const Complex near_far{1.0 / (2.0 * pi * d), -1.0 / wavelength};
  const double phase = 2.0 * pi * d / wavelength;
  return amplitude * near_far * Complex{std::cos(phase), std::sin(phase)};
}

PropagationSet build_propagation(const SimGeometry& geom) {
  const std::size_t n_atoms = geom.atoms();
  const std::size_t n_ant = geom.antennas();
  PropagationSet prop;
  prop.first = CMatrix(n_atoms, n_ant);
  for (std::size_t n = 0; n < n_atoms; ++n)
    for (std::size_t l = 0; l < n_ant; ++l) {
      const Link link = geom.antenna_link(n, l);
      prop.first(n, l) =
          diffraction_coeff(geom.element_area, link.distance, link.cos_obliquity, geom.wavelength);
    }
  if (geom.layers > 1) {
    // Equal spacing makes every inter-layer hop the same matrix.
    CMatrix hop(n_atoms, n_atoms);
    for (std::size_t n = 0; n < n_atoms; ++n)
      for (std::size_t np = 0; np < n_atoms; ++np) {
        const Link link = geom.inter_layer_link(n, np);
        hop(n, np) = diffraction_coeff(geom.element_area, link.distance, link.cos_obliquity,
                                       geom.wavelength);
      }
    prop.inter.assign(geom.layers - 1, hop);
  }
  return prop;
}

double sinc(double x) noexcept {
  if (x == 0.0) return 1.0;
  const double px = pi * x;
  return std::sin(px) / px;
}

CorrelationModel build_correlation(const SimGeometry& geom) {
  const std::size_t n = geom.atoms();
  CorrelationModel corr;
  corr.r = CMatrix(n, n);
  corr.distances.resize(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double d = distance(geom.atom_xy[i], geom.atom_xy[j]);
      corr.distances[i * n + j] = d;
      corr.r(i, j) = i == j ? 1.0 : sinc(2.0 * d / geom.wavelength);
    }
  corr.sqrt = linalg::psd_sqrt(corr.r);
  return corr;
}

double path_loss(const SystemConfig& cfg, double distance_m) {
  if (!(distance_m > cfg.reference_distance_m)) {
    throw NumericalError("path_loss: link distance must exceed the reference distance");
  }
  const double c0 = std::pow(cfg.wavelength() / (4.0 * pi * cfg.reference_distance_m), 2.0);
  return c0 * std::pow(distance_m / cfg.reference_distance_m, cfg.pathloss_exponent);
}

namespace {

CVector colored_channel(const CorrelationModel& corr, double gain, SeededRng& rng) {
  const CVector z = sample_cn(rng, corr.sqrt.rows());
  CVector h = linalg::matvec(corr.sqrt, z);
  const double amp = std::sqrt(gain);
  for (auto& v : h.values()) v *= amp;
  return h;
}

}  // namespace

ChannelSet sample_scenario(const SystemConfig& cfg, const CorrelationModel& corr,
                           SeededRng& rng) {
  if (corr.r.rows() != cfg.atoms()) {
    throw DimensionError("sample_scenario: correlation size does not match the atom count");
  }
  ChannelSet chs;
  chs.bs_position = {0.0, 0.0, cfg.bs_height_m};
  const Point3 center{cfg.cluster_distance_m, 0.0, cfg.user_height_m};
  chs.eve_position = {cfg.cluster_distance_m, 0.0, cfg.eve_height_m};

  for (std::size_t k = 0; k < cfg.users; ++k) {
    Point3 pos;
    double d = 0.0;
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10'000) {
        throw NumericalError("sample_scenario: cannot place a user beyond the reference distance");
      }
      const double r = cfg.cluster_radius_m * std::sqrt(rng.uniform());
      const double theta = 2.0 * pi * rng.uniform();
      pos = {center.x + r * std::cos(theta), center.y + r * std::sin(theta), cfg.user_height_m};
      d = distance(pos, chs.bs_position);
      if (d > cfg.reference_distance_m) break;
    }
    chs.user_positions.push_back(pos);
    chs.user_gain.push_back(path_loss(cfg, d));
  }
  chs.eve_gain = path_loss(cfg, distance(chs.eve_position, chs.bs_position));

  for (std::size_t k = 0; k < cfg.users; ++k)
    chs.users.push_back(colored_channel(corr, chs.user_gain[k], rng));
  chs.eve = colored_channel(corr, chs.eve_gain, rng);
  return chs;
}

double wrap_phase(double phi) noexcept {
  constexpr double two_pi = 2.0 * pi;
  double w = std::fmod(phi, two_pi);
  if (w < 0.0) w += two_pi;
  if (w >= two_pi) w = 0.0;  // fmod of tiny negatives can round up to 2π
  return w;
}

PhaseTensor::PhaseTensor(std::size_t layers, std::size_t atoms)
    : layers_(layers), atoms_(atoms), values_(layers * atoms, 0.0) {}

PhaseTensor::PhaseTensor(std::size_t layers, std::size_t atoms, std::vector<double> values)
    : layers_(layers), atoms_(atoms), values_(std::move(values)) {
  if (values_.size() != layers_ * atoms_) throw DimensionError("PhaseTensor: wrong value count");
  for (auto& v : values_) {
    if (!std::isfinite(v)) throw NumericalError("PhaseTensor: non-finite phase");
    v = wrap_phase(v);
  }
}

PhaseTensor PhaseTensor::random(std::size_t layers, std::size_t atoms, SeededRng& rng) {
  std::vector<double> v(layers * atoms);
  for (auto& x : v) x = rng.uniform(0.0, 2.0 * pi);
  return PhaseTensor(layers, atoms, std::move(v));
}

void PhaseTensor::set(std::size_t m, std::size_t n, double value) {
  if (!std::isfinite(value)) throw NumericalError("PhaseTensor: non-finite phase");
  values_.at(m * atoms_ + n) = wrap_phase(value);
  indices_.reset();
}

std::vector<Complex> PhaseTensor::unit_diagonal(std::size_t m) const {
  std::vector<Complex> d(atoms_);
  const auto phis = layer(m);
  for (std::size_t n = 0; n < atoms_; ++n) d[n] = {std::cos(phis[n]), std::sin(phis[n])};
  return d;
}

void PhaseTensor::mark_quantized(std::vector<int> indices) {
  if (indices.size() != values_.size()) throw DimensionError("PhaseTensor: index count");
  indices_ = std::move(indices);
}

CMatrix compose_G(const PhaseTensor& phases, const PropagationSet& prop) {
  if (phases.layers() != prop.layers() || phases.atoms() != prop.atoms()) {
    throw DimensionError("compose_G: phase tensor is " + std::to_string(phases.layers()) + "x" +
                         std::to_string(phases.atoms()) + " but propagation has " +
                         std::to_string(prop.layers()) + " layers of " +
                         std::to_string(prop.atoms()) + " atoms");
  }
  auto d0 = phases.unit_diagonal(0);
  CMatrix g = CMatrix::diagonal(d0);
  for (std::size_t m = 1; m < phases.layers(); ++m) {
    g = linalg::matmul(prop.inter[m - 1], g);
    g = linalg::scale_rows(phases.unit_diagonal(m), g);
  }
  return g;
}

CompositeChannels composite_channel(const ChannelSet& chs, const CMatrix& g,
                                    const PropagationSet& prop) {
  if (g.rows() != prop.atoms() || g.cols() != prop.atoms()) {
    throw DimensionError("composite_channel: G does not match the atom count");
  }
  auto through = [&](const CVector& h) {
    if (h.size() != g.rows()) throw DimensionError("composite_channel: channel length");
    return linalg::adjoint_matvec(prop.first, linalg::adjoint_matvec(g, h));
  };
  CompositeChannels out;
  for (const auto& h : chs.users) out.users.push_back(through(h));
  out.eve = through(chs.eve);
  return out;
}

SimSystem build_system(const SystemConfig& cfg) {
  SimSystem sys;
  sys.cfg = cfg;
  sys.geometry = build_geometry(cfg);
  sys.propagation = build_propagation(sys.geometry);
  sys.correlation = build_correlation(sys.geometry);
  return sys;
}

}  // namespace simsec::em
