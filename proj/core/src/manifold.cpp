#include "simsec/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <string>

#include "simsec/errors.hpp"

namespace simsec::manifold {
using linalg::Complex;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double circular_distance(double x, double y) noexcept {
  const double d = std::fabs(em::wrap_phase(x) - em::wrap_phase(y));
  return std::min(d, kTwoPi - d);
}

}  // namespace

void ProductManifoldPoint::validate(double tol) const {
  double sum = 0.0;
  for (double v : a) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw NumericalError("negative or non-finite amplitude");
    sum += v * v;
  }
  if (std::fabs(sum - budget) > tol * budget) {
    throw NumericalError("amplitudes are off the power sphere: Σa² = " + std::to_string(sum));
  }
  for (double phi : phases.values()) {
    if (!(phi >= 0.0 && phi < kTwoPi)) throw NumericalError("phase outside [0, 2π)");
  }
}

double torus_retract(double phi, double step) noexcept { return em::wrap_phase(phi + step); }

em::PhaseTensor torus_retract(const em::PhaseTensor& phases, std::span<const double> step) {
  if (step.size() != phases.size()) throw DimensionError("torus_retract: step size mismatch");
  std::vector<double> out(phases.size());
  const auto v = phases.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] + step[i];
  return {phases.layers(), phases.atoms(), std::move(out)};
}

std::vector<double> power_project(std::span<const double> a_tilde, double budget) {
  if (!(budget > 0.0)) throw ConfigError("power_project: budget must be positive");
  std::vector<double> a(a_tilde.begin(), a_tilde.end());
  for (;;) {
    double sum = 0.0;
    for (double v : a) {
      if (!std::isfinite(v)) throw NumericalError("power_project: non-finite input");
      sum += v * v;
    }
    if (sum == 0.0) throw NumericalError("power_project: all-zero amplitude vector");
    const double scale = std::sqrt(budget / sum);
    bool clipped = false;
    for (double& v : a) {
      v *= scale;
      if (v < 0.0) {
        v = 0.0;
        clipped = true;
      }
    }
    if (!clipped) return a;
  }
}

std::vector<double> project_power_tangent(std::span<const double> g, std::span<const double> a,
                                          double budget) {
  if (g.size() != a.size()) throw DimensionError("project_power_tangent: size mismatch");
  double inner = 0.0;
  double norm2 = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    inner += g[k] * a[k];
    norm2 += a[k] * a[k];
  }
  // Σa² equals P_A on the manifold; using the measured norm keeps the result
  // orthogonal to a even when the point carries rounding error.
  const double denom = norm2 > 0.0 ? norm2 : budget;
  std::vector<double> out(g.begin(), g.end());
  for (std::size_t k = 0; k < g.size(); ++k) out[k] -= inner / denom * a[k];
  return out;
}

Tangent riemannian_grad(const secrecy::GradientBundle& g, const ProductManifoldPoint& point) {
  if (g.phase.size() != point.phases.size()) throw DimensionError("riemannian_grad: phase size");
  Tangent t;
  t.phase = g.phase;
  t.power = project_power_tangent(g.power, point.a, point.budget);
  return t;
}

RAdamState::RAdamState(std::size_t n, double alpha_in) : m(n, 0.0), v(n, 0.0), alpha(alpha_in) {}

std::vector<double> adam_update(RAdamState& s, std::span<const double> g) {
  if (g.size() != s.m.size()) throw DimensionError("adam_update: gradient size mismatch");
  ++s.t;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  std::vector<double> step(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g[i];
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g[i] * g[i];
    step[i] = s.alpha * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + s.eps);
  }
  return step;
}

ProductManifoldPoint radam_step(ManifoldAdam& state, const Tangent& g,
                                const ProductManifoldPoint& point) {
  ProductManifoldPoint next;
  next.budget = point.budget;
  next.phases = torus_retract(point.phases, adam_update(state.phase, g.phase));
  const std::vector<double> dp = adam_update(state.power, g.power);
  std::vector<double> a_tilde(point.a);
  for (std::size_t k = 0; k < a_tilde.size(); ++k) a_tilde[k] += dp[k];
  next.a = power_project(a_tilde, point.budget);
  state.power.m = project_power_tangent(state.power.m, next.a, next.budget);
  return next;
}

QuantizationCodebook QuantizationCodebook::make(int bits, CodebookMode mode) {
  if (bits < 1 || bits > 16) throw ConfigError("codebook bits must be in [1, 16]");
  QuantizationCodebook cb;
  cb.bits = bits;
  cb.mode = mode;
  const std::size_t levels = std::size_t{1} << bits;
  const double span = mode == CodebookMode::FullCircle ? kTwoPi : std::numbers::pi;
  cb.codewords.resize(levels);
  for (std::size_t i = 0; i < levels; ++i) {
    cb.codewords[i] = static_cast<double>(i) * span / static_cast<double>(levels);
  }
  return cb;
}

std::size_t QuantizationCodebook::nearest(double phi) const {
  if (codewords.empty()) throw ConfigError("empty codebook");
  std::size_t best = 0;
  double best_d = circular_distance(phi, codewords[0]);
  for (std::size_t i = 1; i < codewords.size(); ++i) {
    const double d = circular_distance(phi, codewords[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

em::PhaseTensor quantize_phases(const em::PhaseTensor& phases,
                                const QuantizationCodebook& codebook) {
  em::PhaseTensor out(phases.layers(), phases.atoms());
  std::vector<int> idx(phases.size());
  for (std::size_t m = 0; m < phases.layers(); ++m) {
    for (std::size_t n = 0; n < phases.atoms(); ++n) {
      const std::size_t i = codebook.nearest(phases(m, n));
      idx[m * phases.atoms() + n] = static_cast<int>(i);
      out.set(m, n, codebook.codewords[i]);
    }
  }
  out.mark_quantized(std::move(idx));
  return out;
}

double refine_quantized(secrecy::WssrEvaluator& evaluator, em::PhaseTensor& phases,
                        std::span<const double> a, const QuantizationCodebook& codebook,
                        std::size_t max_sweeps) {
  const std::size_t levels = codebook.codewords.size();
  std::vector<Complex> unit(levels);
  for (std::size_t i = 0; i < levels; ++i) unit[i] = std::polar(1.0, codebook.codewords[i]);

  std::vector<int> idx(phases.size());
  for (std::size_t i = 0; i < phases.size(); ++i) {
    idx[i] = static_cast<int>(codebook.nearest(phases.values()[i]));
  }

  double current = evaluator.value(phases, a);
  secrecy::LinkGains trial;
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    bool moved = false;
    for (std::size_t m = 0; m < phases.layers(); ++m) {
      const secrecy::LayerFactors f = evaluator.factors(phases, m);
      const std::size_t n_atoms = f.atoms;
      const std::size_t k = f.streams;
      // Current amplitudes c[r][t] assembled from the factors.
      std::vector<Complex> c(f.receivers * k);
      std::vector<Complex> psi(n_atoms);
      for (std::size_t n = 0; n < n_atoms; ++n) psi[n] = std::polar(1.0, phases(m, n));
      for (std::size_t r = 0; r < f.receivers; ++r)
        for (std::size_t t = 0; t < k; ++t) {
          Complex acc{};
          for (std::size_t n = 0; n < n_atoms; ++n)
            acc += f.back[r * n_atoms + n] * psi[n] * f.pre[t * n_atoms + n];
          c[r * k + t] = acc;
        }
      trial.users = k;
      trial.user_amp.resize(k * k);
      trial.eve_amp.resize(k);
      trial.user.resize(k * k);
      trial.eve.resize(k);
      std::vector<Complex> cand(c.size());
      for (std::size_t n = 0; n < n_atoms; ++n) {
        int best_q = -1;
        double best_v = current;
        for (std::size_t q = 0; q < levels; ++q) {
          if (static_cast<int>(q) == idx[m * n_atoms + n]) continue;
          const Complex delta = unit[q] - psi[n];
          for (std::size_t r = 0; r < f.receivers; ++r) {
            const Complex br = f.back[r * n_atoms + n] * delta;
            for (std::size_t t = 0; t < k; ++t) {
              cand[r * k + t] = c[r * k + t] + br * f.pre[t * n_atoms + n];
            }
          }
          for (std::size_t i = 0; i < k * k; ++i) trial.user[i] = std::norm(cand[i]);
          for (std::size_t t = 0; t < k; ++t) trial.eve[t] = std::norm(cand[k * k + t]);
          const double v = evaluator.value_from_gains(trial, a);
          if (v > best_v * (1.0 + 1e-12) + 1e-300) {
            best_v = v;
            best_q = static_cast<int>(q);
          }
        }
        if (best_q >= 0) {
          const Complex delta = unit[static_cast<std::size_t>(best_q)] - psi[n];
          for (std::size_t r = 0; r < f.receivers; ++r) {
            const Complex br = f.back[r * n_atoms + n] * delta;
            for (std::size_t t = 0; t < k; ++t) c[r * k + t] += br * f.pre[t * n_atoms + n];
          }
          psi[n] = unit[static_cast<std::size_t>(best_q)];
          idx[m * n_atoms + n] = best_q;
          phases.set(m, n, codebook.codewords[static_cast<std::size_t>(best_q)]);
          current = best_v;
          moved = true;
        }
      }
      // Resynchronize with an exact pass to shed rank-1 rounding drift.
      current = evaluator.value(phases, a);
    }
    if (!moved) break;
  }
  phases.mark_quantized(std::move(idx));
  return current;
}

void OptimizerTrace::push(double value, double grad_norm_value, double elapsed_s) {
  const double prev = best.empty() ? value : std::max(best.back(), value);
  wssr.push_back(value);
  best.push_back(prev);
  grad_norm.push_back(grad_norm_value);
  seconds.push_back(elapsed_s);
}

void OptimizerTrace::append(const OptimizerTrace& other) {
  for (std::size_t i = 0; i < other.iterations(); ++i) {
    push(other.wssr[i], other.grad_norm[i], other.seconds[i]);
  }
}

void OptimizerTrace::write_csv(std::ostream& out) const {
  out << "iteration,wssr,best,grad_norm,seconds\n";
  char buf[160];
  for (std::size_t i = 0; i < iterations(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", i, wssr[i], best[i],
                  grad_norm[i], seconds[i]);
    out << buf;
  }
}

}  // namespace simsec::manifold
