#include "simsec/secrecy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "simsec/errors.hpp"

namespace simsec::secrecy {
namespace {

constexpr double kInvLn2 = 1.0 / std::numbers::ln2;

/// Per-user sums shared by the objective and its derivatives.
struct RateTerms {
  std::vector<double> p;
  std::vector<double> total_user;  // S_k = σ_k² + Σ_t p_t A_kt
  std::vector<double> interf_user;  // I_k
  double total_eve = 0.0;          // S_e
  std::vector<double> interf_eve;  // I_e,k
  std::vector<double> gamma;
  std::vector<double> gamma_eve;
  std::vector<double> raw;
};

RateTerms rate_terms(const LinkGains& g, std::span<const double> a,
                     std::span<const double> noise, double eve_noise) {
  const std::size_t k_users = g.users;
  if (a.size() != k_users || noise.size() != k_users) {
    throw DimensionError("rate terms: expected " + std::to_string(k_users) + " users");
  }
  RateTerms t;
  t.p.resize(k_users);
  for (std::size_t k = 0; k < k_users; ++k) t.p[k] = a[k] * a[k];
  t.total_user.resize(k_users);
  t.interf_user.resize(k_users);
  t.interf_eve.resize(k_users);
  t.gamma.resize(k_users);
  t.gamma_eve.resize(k_users);
  t.raw.resize(k_users);
  for (std::size_t k = 0; k < k_users; ++k) {
    double others = 0.0;
    for (std::size_t s = 0; s < k_users; ++s)
      if (s != k) others += t.p[s] * g.at(k, s);
    t.interf_user[k] = noise[k] + others;
    t.total_user[k] = t.interf_user[k] + t.p[k] * g.at(k, k);
  }
  double eve_all = 0.0;
  for (std::size_t s = 0; s < k_users; ++s) eve_all += t.p[s] * g.eve[s];
  t.total_eve = eve_noise + eve_all;
  for (std::size_t k = 0; k < k_users; ++k) {
    double others = 0.0;
    for (std::size_t s = 0; s < k_users; ++s)
      if (s != k) others += t.p[s] * g.eve[s];
    t.interf_eve[k] = eve_noise + others;
    t.gamma[k] = t.p[k] * g.at(k, k) / t.interf_user[k];
    t.gamma_eve[k] = t.p[k] * g.eve[k] / t.interf_eve[k];
    t.raw[k] = (std::log1p(t.gamma[k]) - std::log1p(t.gamma_eve[k])) * kInvLn2;
  }
  return t;
}

/// Local weights of log2(1+γ_k) (bob) and log2(1+γ_k^e) (eve) in the objective.
struct ChainWeights {
  std::vector<double> bob;
  std::vector<double> eve;
  double value = 0.0;
};

ChainWeights chain_weights(const Task& task, const RateTerms& t, ClampMode mode) {
  const std::size_t k_users = t.p.size();
  ChainWeights w;
  w.bob.assign(k_users, 0.0);
  w.eve.assign(k_users, 0.0);
  for (std::size_t k = 0; k < k_users; ++k) {
    const bool active = mode == ClampMode::Unclamped || t.raw[k] >= 0.0;
    if (active) {
      w.bob[k] = task.weights[k];
      w.eve[k] = task.weights[k];
      w.value += task.weights[k] * t.raw[k];
    }
  }
  if (task.qos_penalty > 0.0 && !task.qos_min.empty()) {
    for (std::size_t k = 0; k < k_users; ++k) {
      const double shortfall = task.qos_min[k] - std::log1p(t.gamma[k]) * kInvLn2;
      if (shortfall > 0.0) {
        w.value -= task.qos_penalty * shortfall * shortfall;
        w.bob[k] += 2.0 * task.qos_penalty * shortfall;
      }
    }
  }
  return w;
}

}  // namespace

PowerAmplitudes PowerAmplitudes::equal(std::size_t users, double budget) {
  if (users == 0) throw DimensionError("PowerAmplitudes: no users");
  return {std::vector<double>(users, std::sqrt(budget / static_cast<double>(users))), budget};
}

std::vector<double> PowerAmplitudes::powers() const {
  std::vector<double> p(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) p[k] = a[k] * a[k];
  return p;
}

void PowerAmplitudes::validate() const {
  double sum = 0.0;
  for (double v : a) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw NumericalError("power amplitude must be >= 0");
    sum += v * v;
  }
  if (sum > budget * (1.0 + 1e-9)) throw NumericalError("power budget exceeded");
}

Task make_task(const SystemConfig& cfg, std::shared_ptr<const em::PropagationSet> propagation,
               em::ChannelSet channels) {
  cfg.validate();
  if (!propagation) throw std::invalid_argument("make_task: null propagation");
  if (channels.users.size() != cfg.users) throw DimensionError("make_task: user count");
  Task task;
  task.propagation = std::move(propagation);
  task.channels = std::move(channels);
  for (std::size_t k = 0; k < cfg.users; ++k) {
    task.noise.push_back(cfg.noise_power(k));
    task.weights.push_back(cfg.weight(k));
  }
  task.eve_noise = cfg.eve_noise_power();
  task.qos_min = cfg.qos_min_bps_hz;
  task.budget = cfg.total_power_w;
  return task;
}

LinkGains gains_from_G(const Task& task, const linalg::CMatrix& g) {
  const auto& prop = *task.propagation;
  const std::size_t k_users = task.users();
  if (g.rows() != prop.atoms() || g.cols() != prop.atoms()) {
    throw DimensionError("gains_from_G: G does not match the atom count");
  }
  if (prop.antennas() != k_users) throw DimensionError("gains_from_G: antennas != users");
  const linalg::CMatrix gw = linalg::matmul(g, prop.first);  // N×K
  LinkGains out;
  out.users = k_users;
  out.user_amp.resize(k_users * k_users);
  out.eve_amp.resize(k_users);
  auto amp = [&](const linalg::CVector& h, std::size_t t) {
    Complex acc{};
    for (std::size_t n = 0; n < gw.rows(); ++n) acc += std::conj(h[n]) * gw(n, t);
    return acc;
  };
  for (std::size_t k = 0; k < k_users; ++k)
    for (std::size_t t = 0; t < k_users; ++t) out.user_amp[k * k_users + t] = amp(task.channels.users[k], t);
  for (std::size_t t = 0; t < k_users; ++t) out.eve_amp[t] = amp(task.channels.eve, t);
  out.user.resize(out.user_amp.size());
  out.eve.resize(k_users);
  for (std::size_t i = 0; i < out.user_amp.size(); ++i) out.user[i] = std::norm(out.user_amp[i]);
  for (std::size_t t = 0; t < k_users; ++t) out.eve[t] = std::norm(out.eve_amp[t]);
  return out;
}

SinrResult sinr_from_gains(const LinkGains& gains, std::span<const double> a,
                           std::span<const double> noise, double eve_noise) {
  const RateTerms t = rate_terms(gains, a, noise, eve_noise);
  SinrResult out;
  out.gamma = t.gamma;
  out.gamma_eve = t.gamma_eve;
  for (std::size_t k = 0; k < gains.users; ++k) {
    out.terms.alpha.push_back(gains.at(k, k));
    out.terms.beta.push_back(gains.eve[k]);
  }
  out.terms.user = t.interf_user;
  out.terms.eve = t.interf_eve;
  return out;
}

SinrResult sinr_all(const Task& task, const linalg::CMatrix& g, std::span<const double> a) {
  return sinr_from_gains(gains_from_G(task, g), a, task.noise, task.eve_noise);
}

SecrecyReport secrecy_rates(std::span<const double> gamma, std::span<const double> gamma_eve,
                            std::span<const double> weights, std::span<const double> qos_min) {
  if (gamma.size() != gamma_eve.size() || gamma.size() != weights.size()) {
    throw DimensionError("secrecy_rates: length mismatch");
  }
  if (!qos_min.empty() && qos_min.size() != gamma.size()) {
    throw DimensionError("secrecy_rates: QoS threshold count");
  }
  SecrecyReport r;
  r.gamma.assign(gamma.begin(), gamma.end());
  r.gamma_eve.assign(gamma_eve.begin(), gamma_eve.end());
  for (std::size_t k = 0; k < gamma.size(); ++k) {
    if (!(gamma[k] >= 0.0) || !(gamma_eve[k] >= 0.0)) {
      throw NumericalError("secrecy_rates: SINR must be non-negative");
    }
    const double bob = std::log1p(gamma[k]) * kInvLn2;
    const double eve = std::log1p(gamma_eve[k]) * kInvLn2;
    r.raw_rate.push_back(bob - eve);
    r.rate.push_back(std::max(0.0, bob - eve));
    r.wssr += weights[k] * r.rate.back();
    if (!qos_min.empty()) r.qos_ok.push_back(bob >= qos_min[k]);
  }
  return r;
}

WssrEvaluator::WssrEvaluator(const Task& task) : task_(&task) {
  const auto& prop = *task.propagation;
  const std::size_t k_users = task.users();
  if (prop.antennas() != k_users) {
    throw DimensionError("WssrEvaluator: antennas (" + std::to_string(prop.antennas()) +
                         ") must equal users (" + std::to_string(k_users) + ")");
  }
  if (task.noise.size() != k_users || task.weights.size() != k_users) {
    throw DimensionError("WssrEvaluator: noise/weight count");
  }
  if (!task.qos_min.empty() && task.qos_min.size() != k_users) {
    throw DimensionError("WssrEvaluator: QoS threshold count");
  }
  const std::size_t n_atoms = prop.atoms();
  auto conj_of = [&](const linalg::CVector& h) {
    if (h.size() != n_atoms) throw DimensionError("WssrEvaluator: channel length");
    std::vector<Complex> c(n_atoms);
    for (std::size_t n = 0; n < n_atoms; ++n) c[n] = std::conj(h[n]);
    return c;
  };
  for (const auto& h : task.channels.users) h_conj_.push_back(conj_of(h));
  h_conj_.push_back(conj_of(task.channels.eve));
}

void WssrEvaluator::forward(const em::PhaseTensor& phases, bool keep_layers) {
  const auto& prop = *task_->propagation;
  const std::size_t layers = prop.layers();
  const std::size_t n_atoms = prop.atoms();
  const std::size_t k_users = task_->users();
  if (phases.layers() != layers || phases.atoms() != n_atoms) {
    throw DimensionError("phase tensor shape does not match the propagation set");
  }
  const bool same = cache_valid_ && std::equal(cached_phases_.begin(), cached_phases_.end(),
                                               phases.values().begin(), phases.values().end());
  if (same && (!keep_layers || layers_valid_)) return;

  ++forward_passes_;
  diag_.resize(layers);
  for (std::size_t m = 0; m < layers; ++m) diag_[m] = phases.unit_diagonal(m);
  if (keep_layers) pre_.resize(layers);

  // Stream-major current field: cur[t][n].
  std::vector<Complex> cur(k_users * n_atoms);
  for (std::size_t t = 0; t < k_users; ++t)
    for (std::size_t n = 0; n < n_atoms; ++n) cur[t * n_atoms + n] = prop.first(n, t);
  std::vector<Complex> next(cur.size());

  for (std::size_t m = 0; m < layers; ++m) {
    if (keep_layers) pre_[m] = cur;
    const auto& d = diag_[m];
    for (std::size_t t = 0; t < k_users; ++t) {
      Complex* row = cur.data() + t * n_atoms;
      for (std::size_t n = 0; n < n_atoms; ++n) row[n] *= d[n];
    }
    if (m + 1 < layers) {
      const auto& w = prop.inter[m];
      for (std::size_t t = 0; t < k_users; ++t) {
        const Complex* in = cur.data() + t * n_atoms;
        Complex* out = next.data() + t * n_atoms;
        for (std::size_t i = 0; i < n_atoms; ++i) {
          const Complex* wr = w.row(i).data();
          Complex acc{};
          for (std::size_t j = 0; j < n_atoms; ++j) acc += wr[j] * in[j];
          out[i] = acc;
        }
      }
      cur.swap(next);
    }
  }

  gains_.users = k_users;
  gains_.user_amp.assign(k_users * k_users, {});
  gains_.eve_amp.assign(k_users, {});
  gains_.user.resize(k_users * k_users);
  gains_.eve.resize(k_users);
  for (std::size_t r = 0; r <= k_users; ++r) {
    const auto& h = h_conj_[r];
    for (std::size_t t = 0; t < k_users; ++t) {
      const Complex* x = cur.data() + t * n_atoms;
      Complex acc{};
      for (std::size_t n = 0; n < n_atoms; ++n) acc += h[n] * x[n];
      if (r < k_users) {
        gains_.user_amp[r * k_users + t] = acc;
        gains_.user[r * k_users + t] = std::norm(acc);
      } else {
        gains_.eve_amp[t] = acc;
        gains_.eve[t] = std::norm(acc);
      }
    }
  }
  cached_phases_.assign(phases.values().begin(), phases.values().end());
  cache_valid_ = true;
  layers_valid_ = keep_layers;
  back_valid_ = false;
}

void WssrEvaluator::backward(const em::PhaseTensor& phases) {
  forward(phases, true);
  if (back_valid_) return;
  const auto& prop = *task_->propagation;
  const std::size_t layers = prop.layers();
  const std::size_t n_atoms = prop.atoms();
  const std::size_t receivers = task_->users() + 1;
  back_.resize(layers);
  auto& last = back_[layers - 1];
  last.resize(receivers * n_atoms);
  for (std::size_t r = 0; r < receivers; ++r)
    std::copy(h_conj_[r].begin(), h_conj_[r].end(), last.begin() + r * n_atoms);

  std::vector<Complex> scaled(n_atoms);
  for (std::size_t m = layers - 1; m > 0; --m) {
    const auto& w = prop.inter[m - 1];
    const auto& d = diag_[m];
    auto& out = back_[m - 1];
    out.assign(receivers * n_atoms, {});
    for (std::size_t r = 0; r < receivers; ++r) {
      const Complex* in = back_[m].data() + r * n_atoms;
      Complex* o = out.data() + r * n_atoms;
      for (std::size_t i = 0; i < n_atoms; ++i) scaled[i] = in[i] * d[i];
      for (std::size_t i = 0; i < n_atoms; ++i) {
        const Complex s = scaled[i];
        const Complex* wr = w.row(i).data();
        for (std::size_t j = 0; j < n_atoms; ++j) o[j] += s * wr[j];
      }
    }
  }
  back_valid_ = true;
}

const LinkGains& WssrEvaluator::gains(const em::PhaseTensor& phases) {
  forward(phases, false);
  return gains_;
}

double WssrEvaluator::value_from_gains(const LinkGains& g, std::span<const double> a,
                                       ClampMode mode) const {
  const RateTerms t = rate_terms(g, a, task_->noise, task_->eve_noise);
  return chain_weights(*task_, t, mode).value;
}

double WssrEvaluator::value(const em::PhaseTensor& phases, std::span<const double> a,
                            ClampMode mode) {
  forward(phases, false);
  return value_from_gains(gains_, a, mode);
}

SecrecyReport WssrEvaluator::report(const em::PhaseTensor& phases, std::span<const double> a) {
  forward(phases, false);
  const SinrResult s = sinr_from_gains(gains_, a, task_->noise, task_->eve_noise);
  return secrecy_rates(s.gamma, s.gamma_eve, task_->weights, task_->qos_min);
}

double WssrEvaluator::gradient(const em::PhaseTensor& phases, std::span<const double> a,
                               GradientBundle& out, ClampMode mode) {
  backward(phases);
  const std::size_t k_users = task_->users();
  const std::size_t layers = task_->layers();
  const std::size_t n_atoms = task_->atoms();
  const RateTerms t = rate_terms(gains_, a, task_->noise, task_->eve_noise);
  const ChainWeights w = chain_weights(*task_, t, mode);

  // d objective / d A_{k,s}, d B_s and d p_s.
  std::vector<double> d_user(k_users * k_users, 0.0);
  std::vector<double> d_eve(k_users, 0.0);
  std::vector<double> d_power(k_users, 0.0);
  for (std::size_t k = 0; k < k_users; ++k) {
    const double wb = w.bob[k] * kInvLn2;
    const double we = w.eve[k] * kInvLn2;
    if (wb != 0.0) {
      for (std::size_t s = 0; s < k_users; ++s) {
        const double inv = 1.0 / t.total_user[k] - (s != k ? 1.0 / t.interf_user[k] : 0.0);
        d_user[k * k_users + s] += wb * t.p[s] * inv;
        d_power[s] += wb * gains_.at(k, s) * inv;
      }
    }
    if (we != 0.0) {
      for (std::size_t s = 0; s < k_users; ++s) {
        const double inv = 1.0 / t.total_eve - (s != k ? 1.0 / t.interf_eve[k] : 0.0);
        d_eve[s] -= we * t.p[s] * inv;
        d_power[s] -= we * gains_.eve[s] * inv;
      }
    }
  }

  out.power.resize(k_users);
  for (std::size_t s = 0; s < k_users; ++s) out.power[s] = 2.0 * a[s] * d_power[s];

  // Coefficients Q[r][t] = dObj/d|c_rt|² · c_rt.
  const std::size_t receivers = k_users + 1;
  std::vector<Complex> q(receivers * k_users);
  for (std::size_t k = 0; k < k_users; ++k)
    for (std::size_t s = 0; s < k_users; ++s)
      q[k * k_users + s] = d_user[k * k_users + s] * gains_.user_amp[k * k_users + s];
  for (std::size_t s = 0; s < k_users; ++s) q[k_users * k_users + s] = d_eve[s] * gains_.eve_amp[s];

  out.phase.resize(layers * n_atoms);
  out.phase_euclidean.resize(layers * n_atoms);
  for (std::size_t m = 0; m < layers; ++m) {
    const auto& pre = pre_[m];
    const auto& back = back_[m];
    const auto& d = diag_[m];
    for (std::size_t n = 0; n < n_atoms; ++n) {
      Complex acc{};
      for (std::size_t r = 0; r < receivers; ++r) {
        Complex s{};
        for (std::size_t st = 0; st < k_users; ++st)
          s += q[r * k_users + st] * std::conj(pre[st * n_atoms + n]);
        acc += std::conj(back[r * n_atoms + n]) * s;
      }
      out.phase_euclidean[m * n_atoms + n] = acc;
      out.phase[m * n_atoms + n] = 2.0 * (std::conj(d[n]) * acc).imag();
    }
  }
  return w.value;
}

LayerFactors WssrEvaluator::factors(const em::PhaseTensor& phases, std::size_t layer) {
  if (layer >= task_->layers()) throw std::out_of_range("factors: layer index");
  backward(phases);
  LayerFactors f;
  f.atoms = task_->atoms();
  f.streams = task_->users();
  f.receivers = task_->users() + 1;
  f.pre = pre_[layer];
  f.back = back_[layer];
  return f;
}

std::vector<double> grad_power(const Task& task, const em::PhaseTensor& phases,
                               std::span<const double> a) {
  WssrEvaluator ev(task);
  GradientBundle g;
  (void)ev.gradient(phases, a, g);
  return g.power;
}

std::vector<double> grad_phase(const Task& task, const em::PhaseTensor& phases,
                               std::span<const double> a) {
  WssrEvaluator ev(task);
  GradientBundle g;
  (void)ev.gradient(phases, a, g);
  return g.phase;
}

std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> x, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("fd_gradient: step must be positive");
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double up = f(probe);
    probe[i] = x[i] - step;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

std::vector<double> fd_gradient(const Task& task, const em::PhaseTensor& phases,
                                std::span<const double> a, FdTarget which, double step) {
  WssrEvaluator ev(task);
  if (which == FdTarget::Power) {
    return fd_gradient([&](std::span<const double> x) { return ev.value(phases, x); }, a, step);
  }
  const std::vector<double> raw(phases.values().begin(), phases.values().end());
  return fd_gradient(
      [&](std::span<const double> x) {
        // Unwrapped values keep the difference quotient well defined near 0/2π.
        em::PhaseTensor p(phases.layers(), phases.atoms(), {x.begin(), x.end()});
        return ev.value(p, a);
      },
      raw, step);
}

}  // namespace simsec::secrecy
