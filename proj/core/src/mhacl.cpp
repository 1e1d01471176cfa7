#include "simsec/mhacl.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include "simsec/errors.hpp"

namespace simsec::mhacl {
namespace {

std::vector<double> dct_matrix(std::size_t n) {
  std::vector<double> a(n * n);
  const double nn = static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double s = k == 0 ? std::sqrt(1.0 / nn) : std::sqrt(2.0 / nn);
    for (std::size_t i = 0; i < n; ++i) {
      a[k * n + i] = s * std::cos(std::numbers::pi * (static_cast<double>(i) + 0.5) *
                                  static_cast<double>(k) / nn);
    }
  }
  return a;
}

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

void ema_update(std::vector<double>& ema, std::span<const double> g, double decay) {
  if (ema.size() != g.size()) throw DimensionError("EMA size mismatch");
  for (std::size_t i = 0; i < g.size(); ++i) ema[i] = decay * ema[i] + (1.0 - decay) * std::fabs(g[i]);
}

std::vector<double> mask_from_ema(const std::vector<double>& ema) {
  const double mean =
      ema.empty() ? 0.0 : std::accumulate(ema.begin(), ema.end(), 0.0) / static_cast<double>(ema.size());
  std::vector<double> m(ema.size(), 1.0);
  if (!(mean > 0.0)) return m;
  for (std::size_t i = 0; i < ema.size(); ++i) m[i] = std::clamp(ema[i] / mean, 0.0, 1.0);
  return m;
}

void require_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(want) + ", got " +
                         std::to_string(got));
  }
}

}  // namespace

DctBasis::DctBasis(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), row_basis_(dct_matrix(rows)), col_basis_(dct_matrix(cols)) {
  if (rows == 0 || cols == 0) throw DimensionError("DctBasis: empty grid");
}

void DctBasis::apply(std::span<const double> x, std::span<double> out, bool transpose) const {
  require_size(x.size(), size(), "DctBasis input");
  require_size(out.size(), size(), "DctBasis output");
  std::vector<double> tmp(size(), 0.0);
  // tmp = A x (or Aᵀ x) along rows.
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t k = 0; k < rows_; ++k) {
      const double a = transpose ? row_basis_[k * rows_ + i] : row_basis_[i * rows_ + k];
      if (a == 0.0) continue;
      for (std::size_t j = 0; j < cols_; ++j) tmp[i * cols_ + j] += a * x[k * cols_ + j];
    }
  }
  // out = tmp Bᵀ (or tmp B) along columns.
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) {
      double acc = 0.0;
      for (std::size_t l = 0; l < cols_; ++l) {
        const double b = transpose ? col_basis_[l * cols_ + j] : col_basis_[j * cols_ + l];
        acc += tmp[i * cols_ + l] * b;
      }
      out[i * cols_ + j] = acc;
    }
  }
}

void DctBasis::forward(std::span<const double> x, std::span<double> out) const {
  apply(x, out, false);
}

void DctBasis::inverse(std::span<const double> x, std::span<double> out) const {
  apply(x, out, true);
}

PolicyParams PolicyParams::identity(std::size_t users, std::size_t layers, std::size_t grid_rows,
                                    std::size_t grid_cols, double lambda_scale) {
  PolicyParams p;
  p.users = users;
  p.layers = layers;
  p.grid_rows = grid_rows;
  p.grid_cols = grid_cols;
  const std::size_t mn = layers * grid_rows * grid_cols;
  p.power_gain.assign(users, 1.0);
  p.power_bias.assign(users, 0.0);
  p.phase_gain.assign(mn, 1.0);
  p.phase_bias.assign(mn, 0.0);
  p.lambda_scale = lambda_scale;
  p.mask_power.assign(users, 1.0);
  p.mask_phase.assign(mn, 1.0);
  p.interference.assign(mn, 0.0);
  p.validate();
  return p;
}

void PolicyParams::validate() const {
  const std::size_t mn = layers * atoms();
  if (users == 0 || layers == 0 || atoms() == 0) throw DimensionError("PolicyParams: empty shape");
  require_size(power_gain.size(), users, "power gain");
  require_size(power_bias.size(), users, "power bias");
  require_size(phase_gain.size(), mn, "phase gain");
  require_size(phase_bias.size(), mn, "phase bias");
  require_size(mask_power.size(), users, "power mask");
  require_size(mask_phase.size(), mn, "phase mask");
  require_size(interference.size(), mn, "interference map");
  if (!(lambda_scale > 0.0) || !std::isfinite(lambda_scale)) {
    throw NumericalError("PolicyParams: lambda_scale must be positive and finite");
  }
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  auto unit = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x >= 0.0 && x <= 1.0; });
  };
  if (!finite(power_gain) || !finite(power_bias) || !finite(phase_gain) || !finite(phase_bias) ||
      !finite(interference)) {
    throw NumericalError("PolicyParams: non-finite parameter");
  }
  if (!unit(mask_power) || !unit(mask_phase)) throw NumericalError("PolicyParams: mask outside [0,1]");
  if (!std::all_of(interference.begin(), interference.end(), [](double x) { return x >= 0.0; })) {
    throw NumericalError("PolicyParams: negative interference map");
  }
}

std::vector<double> PolicyParams::theta_power() const {
  std::vector<double> t(power_gain);
  t.insert(t.end(), power_bias.begin(), power_bias.end());
  return t;
}

std::vector<double> PolicyParams::theta_phase() const {
  std::vector<double> t(phase_gain);
  t.insert(t.end(), phase_bias.begin(), phase_bias.end());
  t.push_back(std::log(lambda_scale));
  return t;
}

void PolicyParams::set_theta_power(std::span<const double> theta) {
  require_size(theta.size(), 2 * users, "theta_p");
  std::copy(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(users), power_gain.begin());
  std::copy(theta.begin() + static_cast<std::ptrdiff_t>(users), theta.end(), power_bias.begin());
}

void PolicyParams::set_theta_phase(std::span<const double> theta) {
  const std::size_t mn = layers * atoms();
  require_size(theta.size(), 2 * mn + 1, "theta_phi");
  const auto mid = theta.begin() + static_cast<std::ptrdiff_t>(mn);
  std::copy(theta.begin(), mid, phase_gain.begin());
  std::copy(mid, mid + static_cast<std::ptrdiff_t>(mn), phase_bias.begin());
  lambda_scale = std::exp(theta.back());
}

std::vector<double> PolicyParams::theta() const {
  std::vector<double> t = theta_power();
  const std::vector<double> ph = theta_phase();
  t.insert(t.end(), ph.begin(), ph.end());
  return t;
}

std::vector<double> pan_update(std::span<const double> a, std::span<const double> g_a,
                               const PolicyParams& params, double budget, double rate) {
  require_size(a.size(), params.users, "pan_update amplitudes");
  require_size(g_a.size(), params.users, "pan_update gradient");
  std::vector<double> a_tilde(a.begin(), a.end());
  for (std::size_t k = 0; k < a.size(); ++k) {
    a_tilde[k] += rate * (params.power_gain[k] * (g_a[k] * params.mask_power[k]) + params.power_bias[k]);
  }
  return manifold::power_project(a_tilde, budget);
}

std::vector<double> normalized_interference(std::span<const double> c) {
  std::vector<double> out(c.size(), 1.0);
  if (c.empty()) return out;
  const double mean = std::accumulate(c.begin(), c.end(), 0.0) / static_cast<double>(c.size());
  if (!(mean > 0.0)) return out;
  for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i] / mean;
  return out;
}

std::vector<double> spectral_transform(std::span<const double> x, const PolicyParams& params,
                                       const DctBasis& basis) {
  const std::size_t n = params.atoms();
  require_size(basis.size(), n, "DCT basis");
  require_size(x.size(), params.layers * n, "spectral input");
  std::vector<double> out(x.size());
  std::vector<double> coeff(n);
  for (std::size_t m = 0; m < params.layers; ++m) {
    basis.forward(x.subspan(m * n, n), coeff);
    for (std::size_t i = 0; i < n; ++i) {
      coeff[i] = params.phase_gain[m * n + i] * coeff[i] + params.phase_bias[m * n + i];
    }
    basis.inverse(coeff, std::span<double>(out).subspan(m * n, n));
  }
  return out;
}

em::PhaseTensor psn_update(const em::PhaseTensor& phases, std::span<const double> g_phase,
                           const PolicyParams& params, const DctBasis& basis, double kappa,
                           std::vector<double>* delta) {
  require_size(g_phase.size(), phases.size(), "psn_update gradient");
  require_size(phases.size(), params.layers * params.atoms(), "psn_update phases");
  const std::vector<double> c_norm = normalized_interference(params.interference);
  std::vector<double> x(g_phase.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = g_phase[i] * params.mask_phase[i] * c_norm[i];
  const std::vector<double> t = spectral_transform(x, params, basis);
  std::vector<double> step(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    step[i] = manifold::squashed_step(t[i], params.lambda_scale, kappa);
  }
  em::PhaseTensor out = manifold::torus_retract(phases, step);
  if (delta) *delta = std::move(step);
  return out;
}

void MetaConfig::validate() const {
  if (epochs == 0 || outer == 0 || psn_period == 0) {
    throw ConfigError("mhacl: epochs, outer and psn_period must be >= 1");
  }
  if (!(alpha_power >= 0.0) || !(alpha_phase >= 0.0)) throw ConfigError("mhacl: rates must be >= 0");
  if (spsa_samples == 0 || !(spsa_scale > 0.0)) {
    throw ConfigError("mhacl: SPSA needs >= 1 sample and a positive scale");
  }
  if (!(pan_rate >= 0.0) || !(psn_scale > 0.0) || !(psn_kappa > 0.0)) {
    throw ConfigError("mhacl: pan_rate >= 0, psn_scale > 0 and psn_kappa > 0 required");
  }
  if (!(lambda_reg >= 0.0) || !(beta_traj >= 0.0)) {
    throw ConfigError("mhacl: lambda_reg and beta_traj must be >= 0");
  }
  auto in_unit = [](double d) { return d >= 0.0 && d < 1.0; };
  if (!in_unit(snapshot_decay) || snapshot_decay == 0.0 || !in_unit(mask_decay) ||
      !in_unit(interference_decay)) {
    throw ConfigError("mhacl: decays must lie in [0, 1) (snapshot decay in (0, 1))");
  }
  if (buffer_capacity == 0) throw ConfigError("mhacl: buffer capacity must be >= 1");
  if (!(buffer_temperature >= 0.0)) throw ConfigError("mhacl: buffer temperature must be >= 0");
}

ExperienceBuffer::ExperienceBuffer(std::size_t capacity, double temperature)
    : capacity_(capacity), temperature_(temperature) {
  if (capacity == 0) throw ConfigError("ExperienceBuffer: capacity must be >= 1");
  if (!(temperature >= 0.0)) throw ConfigError("ExperienceBuffer: temperature must be >= 0");
}

void ExperienceBuffer::evict() {
  while (entries_.size() > capacity_) {
    // Lowest priority goes; among equals the oldest.
    auto victim = std::min_element(entries_.begin(), entries_.end(),
                                   [](const BufferEntry& x, const BufferEntry& y) {
                                     if (x.priority != y.priority) return x.priority < y.priority;
                                     return x.sequence < y.sequence;
                                   });
    entries_.erase(victim);
  }
}

void ExperienceBuffer::insert(BufferEntry entry) {
  if (!(entry.priority >= 0.0)) throw NumericalError("ExperienceBuffer: negative priority");
  entry.sequence = next_sequence_++;
  entries_.push_back(std::move(entry));
  evict();
}

void ExperienceBuffer::add(BufferEntry entry, double best_wssr) {
  entry.sequence = next_sequence_++;
  entries_.push_back(std::move(entry));
  reprioritize(best_wssr);
  evict();
}

void ExperienceBuffer::reprioritize(double best_wssr) {
  std::vector<std::size_t> order(entries_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return entries_[x].sequence > entries_[y].sequence;
  });
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    BufferEntry& e = entries_[order[rank]];
    e.priority = std::fabs(best_wssr - e.wssr) + 0.1 / static_cast<double>(rank + 1);
  }
}

std::vector<double> ExperienceBuffer::probabilities() const {
  std::vector<double> p(entries_.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = temperature_ == 0.0 ? 1.0 : std::pow(entries_[i].priority, temperature_);
    total += p[i];
  }
  if (!(total > 0.0)) {
    std::fill(p.begin(), p.end(), 1.0);
    total = static_cast<double>(p.size());
  }
  for (double& x : p) x /= total;
  return p;
}

std::size_t ExperienceBuffer::sample(SeededRng& rng) const {
  if (entries_.empty()) throw std::logic_error("ExperienceBuffer: sampling from an empty buffer");
  const std::vector<double> p = probabilities();
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return i;
  }
  return p.size() - 1;
}

std::vector<std::size_t> ExperienceBuffer::sample_batch(std::size_t n, SeededRng& rng) const {
  std::vector<std::size_t> out(n);
  for (auto& i : out) i = sample(rng);
  return out;
}

void ExperienceBuffer::restore(std::vector<BufferEntry> entries, std::size_t next_sequence) {
  for (const auto& e : entries) {
    if (!(e.priority >= 0.0)) throw NumericalError("ExperienceBuffer: negative priority");
    if (e.sequence >= next_sequence) throw NumericalError("ExperienceBuffer: bad sequence number");
  }
  if (entries.size() > capacity_) throw NumericalError("ExperienceBuffer: over capacity");
  entries_ = std::move(entries);
  next_sequence_ = next_sequence;
}

void TrajectoryStats::update(std::span<const double> x) {
  if (count == 0) {
    mean.assign(x.size(), 0.0);
    m2.assign(x.size(), 0.0);
  }
  require_size(x.size(), mean.size(), "trajectory sample");
  ++count;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mean[i];
    mean[i] += d / static_cast<double>(count);
    m2[i] += d * (x[i] - mean[i]);
  }
}

std::vector<double> TrajectoryStats::variance(double floor) const {
  std::vector<double> v(mean.size(), floor);
  if (count < 2) return v;
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = std::max(floor, m2[i] / static_cast<double>(count - 1));
  }
  return v;
}

double TrajectoryStats::nll(std::span<const double> x) const {
  if (count == 0) return 0.0;
  require_size(x.size(), mean.size(), "trajectory sample");
  const std::vector<double> var = variance();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mean[i];
    s += 0.5 * std::log(2.0 * std::numbers::pi * var[i]) + 0.5 * d * d / var[i];
  }
  return s;
}

ContinualState ContinualState::initial(std::size_t users, std::size_t layers,
                                       std::size_t grid_rows, std::size_t grid_cols,
                                       const MetaConfig& cfg) {
  cfg.validate();
  ContinualState s;
  s.params = PolicyParams::identity(users, layers, grid_rows, grid_cols, cfg.psn_scale);
  s.lambda_reg = cfg.lambda_reg;
  s.beta_traj = cfg.beta_traj;
  s.snapshot_decay = cfg.snapshot_decay;
  s.buffer = ExperienceBuffer(cfg.buffer_capacity, cfg.buffer_temperature);
  s.meta_power = manifold::RAdamState(s.params.theta_power().size(), cfg.alpha_power);
  s.meta_phase = manifold::RAdamState(s.params.theta_phase().size(), cfg.alpha_phase);
  const std::size_t mn = layers * grid_rows * grid_cols;
  s.ema_power.assign(users, 0.0);
  s.ema_phase.assign(mn, 0.0);
  s.ema_interference.assign(mn, 0.0);
  return s;
}

std::vector<double> ContinualState::snapshot_weights() const {
  std::vector<double> w(snapshots.size());
  double total = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    w[k] = std::pow(snapshot_decay, static_cast<double>(w.size() - 1 - k));
    total += w[k];
  }
  for (double& x : w) x /= total;
  return w;
}

void ContinualState::validate() const {
  params.validate();
  const std::size_t dim = params.theta().size();
  for (const auto& s : snapshots) require_size(s.size(), dim, "snapshot");
  if (!(lambda_reg >= 0.0) || !(beta_traj >= 0.0)) throw NumericalError("negative loss weight");
  if (!(snapshot_decay > 0.0 && snapshot_decay < 1.0)) throw NumericalError("snapshot decay");
  require_size(meta_power.m.size(), params.theta_power().size(), "meta power moments");
  require_size(meta_phase.m.size(), params.theta_phase().size(), "meta phase moments");
  require_size(ema_power.size(), params.users, "power EMA");
  require_size(ema_phase.size(), params.layers * params.atoms(), "phase EMA");
  require_size(ema_interference.size(), params.layers * params.atoms(), "interference EMA");
}

double continual_loss(double wssr, std::span<const double> theta, const ContinualState& state,
                      std::span<const double> layer_step) {
  double reg = 0.0;
  const std::vector<double> w = state.snapshot_weights();
  for (std::size_t k = 0; k < state.snapshots.size(); ++k) {
    const auto& s = state.snapshots[k];
    require_size(theta.size(), s.size(), "continual_loss theta");
    double d = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) d += (theta[i] - s[i]) * (theta[i] - s[i]);
    reg += w[k] * d;
  }
  const double traj = state.beta_traj > 0.0 ? state.trajectory.nll(layer_step) : 0.0;
  return -wssr + state.lambda_reg * reg + state.beta_traj * traj;
}

InnerResult inner_loop(Objective& objective, const ProductManifoldPoint& start,
                       const PolicyParams& params, const DctBasis& basis, const MetaConfig& cfg,
                       std::size_t steps) {
  using Clock = std::chrono::steady_clock;
  const double budget = objective.budget();
  const std::size_t n = objective.atoms();
  InnerResult res;
  res.best = start;
  res.best_value = objective.value(start);
  if (!std::isfinite(res.best_value)) throw NumericalError("objective returned a non-finite value");
  res.layer_step.assign(objective.layers(), 0.0);

  ProductManifoldPoint cur = start;
  secrecy::GradientBundle g;
  std::vector<double> delta;
  for (std::size_t s = 0; s < steps; ++s) {
    const auto t0 = Clock::now();
    (void)manifold::ascent_gradient(objective, cur, g);
    double gn = norm2(g.phase);
    cur.phases = psn_update(cur.phases, g.phase, params, basis, cfg.psn_kappa, &delta);
    for (std::size_t m = 0; m < res.layer_step.size(); ++m) {
      for (std::size_t i = 0; i < n; ++i) res.layer_step[m] += std::fabs(delta[m * n + i]);
    }
    (void)manifold::ascent_gradient(objective, cur, g);
    gn += norm2(g.power);
    cur.a = pan_update(cur.a, g.power, params, budget, cfg.pan_rate * budget);
    const double v = objective.value(cur);
    if (!std::isfinite(v)) throw NumericalError("objective returned a non-finite value");
    res.trace.push(v, std::sqrt(gn), std::chrono::duration<double>(Clock::now() - t0).count());
    if (v > res.best_value) {
      res.best_value = v;
      res.best = cur;
    }
  }
  if (steps > 0) {
    for (double& x : res.layer_step) x /= static_cast<double>(steps * n);
  }
  res.last = std::move(cur);
  return res;
}

std::vector<double> spsa_gradient(const std::function<double(std::span<const double>)>& loss,
                                  std::span<const double> theta, std::size_t samples,
                                  double scale, SeededRng& rng) {
  if (samples == 0 || !(scale > 0.0)) throw ConfigError("spsa_gradient: bad sample count or scale");
  const std::size_t d = theta.size();
  std::vector<double> c(d);
  for (std::size_t i = 0; i < d; ++i) c[i] = scale * std::max(std::fabs(theta[i]), 1.0);
  std::vector<double> g(d, 0.0);
  std::vector<double> delta(d);
  std::vector<double> probe(d);
  for (std::size_t s = 0; s < samples; ++s) {
    for (double& x : delta) x = rng.rademacher();
    for (std::size_t i = 0; i < d; ++i) probe[i] = theta[i] + c[i] * delta[i];
    const double up = loss(probe);
    for (std::size_t i = 0; i < d; ++i) probe[i] = theta[i] - c[i] * delta[i];
    const double down = loss(probe);
    if (!std::isfinite(up) || !std::isfinite(down)) throw NumericalError("SPSA: non-finite loss");
    const double diff = up - down;
    if (diff == 0.0) continue;
    for (std::size_t i = 0; i < d; ++i) g[i] += diff / (2.0 * c[i] * delta[i]);
  }
  for (double& x : g) x /= static_cast<double>(samples);
  return g;
}

void meta_step(PolicyParams& params, const std::function<double(const PolicyParams&)>& loss,
               const MetaConfig& cfg, std::size_t epoch, manifold::RAdamState& adam_power,
               manifold::RAdamState& adam_phase, SeededRng& rng) {
  const bool do_power = cfg.alpha_power > 0.0;
  const bool do_phase = cfg.alpha_phase > 0.0 && epoch % cfg.psn_period == 0;
  if (!do_power && !do_phase) return;
  const std::vector<double> tp = params.theta_power();
  const std::vector<double> tf = params.theta_phase();
  std::vector<double> theta;
  if (do_power) theta.insert(theta.end(), tp.begin(), tp.end());
  if (do_phase) theta.insert(theta.end(), tf.begin(), tf.end());
  const std::size_t np = do_power ? tp.size() : 0;

  auto split_into = [&](PolicyParams& q, std::span<const double> x) {
    if (do_power) q.set_theta_power(x.subspan(0, np));
    if (do_phase) q.set_theta_phase(x.subspan(np));
  };
  const std::vector<double> g = spsa_gradient(
      [&](std::span<const double> x) {
        PolicyParams q = params;
        split_into(q, x);
        return loss(q);
      },
      theta, cfg.spsa_samples, cfg.spsa_scale, rng);

  std::vector<double> next(theta);
  if (do_power) {
    adam_power.alpha = cfg.alpha_power;
    const auto step = adam_update(adam_power, std::span<const double>(g).subspan(0, np));
    for (std::size_t i = 0; i < np; ++i) next[i] -= step[i];
  }
  if (do_phase) {
    adam_phase.alpha = cfg.alpha_phase;
    const auto step = adam_update(adam_phase, std::span<const double>(g).subspan(np));
    for (std::size_t i = 0; i < step.size(); ++i) next[np + i] -= step[i];
  }
  split_into(params, next);
}

std::pair<std::size_t, std::size_t> grid_shape(std::size_t atoms, std::size_t atoms_x,
                                               std::size_t atoms_y) {
  if (atoms_x * atoms_y == atoms && atoms_x > 0) return {atoms_x, atoms_y};
  return {1, atoms};
}

MhaclResult mhacl_run(std::span<Objective* const> tasks, const em::PhaseTensor& init,
                      const MetaConfig& cfg, ContinualState& state, SeededRng& rng) {
  using Clock = std::chrono::steady_clock;
  cfg.validate();
  state.validate();
  if (tasks.empty()) throw std::invalid_argument("mhacl_run: empty task stream");
  const PolicyParams& shape = state.params;
  const DctBasis basis(shape.grid_rows, shape.grid_cols);
  SeededRng meta_rng = rng.derive(1);
  SeededRng buffer_rng = rng.derive(2);

  MhaclResult result;
  for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
    Objective& obj = *tasks[ti];
    if (obj.users() != shape.users || obj.layers() != shape.layers || obj.atoms() != shape.atoms()) {
      throw DimensionError("mhacl_run: task shape does not match the policy parameters");
    }
    const em::PhaseTensor& phases = state.last_phases ? *state.last_phases : init;
    require_size(phases.size(), shape.layers * shape.atoms(), "mhacl_run initial phases");
    ProductManifoldPoint cur = manifold::equal_power_point(phases, obj.users(), obj.budget());

    TaskOutcome outcome;
    outcome.start_value = obj.value(cur);
    outcome.best = cur;
    outcome.value = outcome.start_value;
    std::vector<double> task_step(shape.layers, 0.0);
    std::size_t task_loops = 0;

    for (std::size_t e = 0; e < cfg.epochs; ++e) {
      const auto t0 = Clock::now();
      OptimizerTrace epoch_trace;
      double lbar = 0.0;
      for (std::size_t o = 0; o < cfg.outer; ++o) {
        InnerResult inner = inner_loop(obj, cur, state.params, basis, cfg, cfg.inner);
        lbar += continual_loss(inner.best_value, state.params.theta(), state, inner.layer_step) /
                static_cast<double>(cfg.outer);
        for (std::size_t m = 0; m < task_step.size(); ++m) task_step[m] += inner.layer_step[m];
        ++task_loops;
        if (inner.best_value > outcome.value) {
          outcome.value = inner.best_value;
          outcome.best = inner.best;
        }
        epoch_trace.append(inner.trace);
        cur = std::move(inner.last);
      }
      if (cfg.meta_enabled() && cfg.inner > 0) {
        const ProductManifoldPoint anchor = cur;
        meta_step(
            state.params,
            [&](const PolicyParams& p) {
              const InnerResult r = inner_loop(obj, anchor, p, basis, cfg, cfg.inner);
              return continual_loss(r.best_value, p.theta(), state, r.layer_step);
            },
            cfg, e, state.meta_power, state.meta_phase, meta_rng);
      }
      outcome.epoch_loss.push_back(lbar);
      // Meta-step time is spread evenly over the epoch's iterations.
      const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
      const std::size_t its = epoch_trace.iterations();
      for (std::size_t i = 0; i < its; ++i) {
        result.trace.push(epoch_trace.wssr[i], epoch_trace.grad_norm[i],
                          secs / static_cast<double>(its));
      }
    }

    // Task end: refresh masks, interference map, buffer, snapshots and trajectory.
    secrecy::GradientBundle g;
    (void)manifold::ascent_gradient(obj, outcome.best, g);
    if (!state.buffer.empty()) {
      for (std::size_t idx : state.buffer.sample_batch(cfg.buffer_batch, buffer_rng)) {
        const BufferEntry& past = state.buffer.entries()[idx];
        ema_update(state.ema_power, past.grad_power, cfg.mask_decay);
        ema_update(state.ema_phase, past.grad_phase, cfg.mask_decay);
      }
    }
    ema_update(state.ema_power, g.power, cfg.mask_decay);
    ema_update(state.ema_phase, g.phase, cfg.mask_decay);
    ema_update(state.ema_interference, g.phase, cfg.interference_decay);
    state.params.mask_power = mask_from_ema(state.ema_power);
    state.params.mask_phase = mask_from_ema(state.ema_phase);
    state.params.interference = state.ema_interference;

    double best_seen = outcome.value;
    for (const auto& e : state.buffer.entries()) best_seen = std::max(best_seen, e.wssr);
    state.buffer.add(BufferEntry{state.tasks_seen, ti, g.power, g.phase, outcome.value, 0.0, 0},
                     best_seen);

    state.snapshots.push_back(state.params.theta());
    if (task_loops > 0) {
      for (double& x : task_step) x /= static_cast<double>(task_loops);
      state.trajectory.update(task_step);
    }
    state.last_phases = outcome.best.phases;
    ++state.tasks_seen;
    result.tasks.push_back(std::move(outcome));
  }
  return result;
}

}  // namespace simsec::mhacl
