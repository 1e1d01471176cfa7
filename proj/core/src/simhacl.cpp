#include "simsec/simhacl.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "simsec/errors.hpp"

namespace simsec::manifold {
namespace {

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

void require_finite(double v, const secrecy::GradientBundle& g) {
  if (!std::isfinite(v)) throw NumericalError("objective returned a non-finite value");
  for (double x : g.power)
    if (!std::isfinite(x)) throw NumericalError("objective returned a non-finite power gradient");
  for (double x : g.phase)
    if (!std::isfinite(x)) throw NumericalError("objective returned a non-finite phase gradient");
}

bool window_converged(const OptimizerTrace& trace, const SimhaclOptions& o) {
  const std::size_t n = trace.iterations();
  if (!o.early_stop || n <= o.window) return false;
  const double now = trace.best.back();
  const double then = trace.best[n - 1 - o.window];
  return now > 0.0 && now - then <= o.tolerance * now;
}

}  // namespace

double Objective::quantize(ProductManifoldPoint& point, const QuantizationCodebook& codebook,
                           std::size_t /*polish_sweeps*/) {
  point.phases = quantize_phases(point.phases, codebook);
  return value(point);
}

double WssrObjective::value(const ProductManifoldPoint& point) {
  return evaluator_.value(point.phases, point.a);
}

double WssrObjective::gradient(const ProductManifoldPoint& point, secrecy::GradientBundle& out,
                               secrecy::ClampMode mode) {
  return evaluator_.gradient(point.phases, point.a, out, mode);
}

double WssrObjective::quantize(ProductManifoldPoint& point, const QuantizationCodebook& codebook,
                               std::size_t polish_sweeps) {
  point.phases = quantize_phases(point.phases, codebook);
  if (polish_sweeps == 0) return value(point);
  return refine_quantized(evaluator_, point.phases, point.a, codebook, polish_sweeps);
}

double ascent_gradient(Objective& objective, const ProductManifoldPoint& point,
                       secrecy::GradientBundle& out) {
  const double v = objective.gradient(point, out, secrecy::ClampMode::Clamped);
  require_finite(v, out);
  if (norm2(out.power) == 0.0 && norm2(out.phase) == 0.0) {
    secrecy::GradientBundle smooth;
    (void)objective.gradient(point, smooth, secrecy::ClampMode::Unclamped);
    require_finite(0.0, smooth);
    out = std::move(smooth);
  }
  return v;
}

void SimhaclOptions::validate() const {
  if (window == 0) throw ConfigError("optimizer window must be >= 1");
  if (restarts == 0) throw ConfigError("optimizer restarts must be >= 1");
  if (!(tolerance >= 0.0)) throw ConfigError("optimizer tolerance must be >= 0");
  if (!(phase_lr >= 0.0) || !(power_lr >= 0.0) || !(power_step >= 0.0)) {
    throw ConfigError("optimizer rates must be >= 0");
  }
  if (!(squash_scale >= 0.0) || !(squash_kappa > 0.0)) {
    throw ConfigError("squash scale must be >= 0 and kappa > 0");
  }
}

double squashed_step(double g, double scale, double kappa) noexcept {
  return scale * (1.0 / (1.0 + std::exp(-kappa * g)) - 0.5);
}

ProductManifoldPoint equal_power_point(const em::PhaseTensor& phases, std::size_t users,
                                       double budget) {
  ProductManifoldPoint p;
  p.phases = phases;
  p.phases.clear_quantized();
  p.a = secrecy::PowerAmplitudes::equal(users, budget).a;
  p.budget = budget;
  return p;
}

SimhaclResult simhacl_single(Objective& objective, const ProductManifoldPoint& start,
                             const SimhaclOptions& o) {
  using Clock = std::chrono::steady_clock;
  o.validate();
  const double budget = objective.budget();
  SimhaclResult res;
  res.point = start;
  res.value = objective.value(start);
  if (!std::isfinite(res.value)) throw NumericalError("objective returned a non-finite value");

  ProductManifoldPoint cur = start;
  ManifoldAdam adam{RAdamState(cur.phases.size(), o.optimize_phases ? o.phase_lr : 0.0),
                    RAdamState(cur.a.size(), o.power_lr * std::sqrt(budget))};
  secrecy::GradientBundle g;
  for (std::size_t it = 0; it < o.max_iterations; ++it) {
    const auto t0 = Clock::now();
    double gnorm = 0.0;
    if (o.rule == StepRule::JointAdam) {
      (void)ascent_gradient(objective, cur, g);
      Tangent tg = riemannian_grad(g, cur);
      if (!o.optimize_phases) std::fill(tg.phase.begin(), tg.phase.end(), 0.0);
      gnorm = std::sqrt(norm2(tg.phase) + norm2(tg.power));
      cur = radam_step(adam, tg, cur);
    } else {
      if (o.optimize_phases) {
        (void)ascent_gradient(objective, cur, g);
        std::vector<double> step(g.phase.size());
        for (std::size_t i = 0; i < step.size(); ++i) {
          step[i] = squashed_step(g.phase[i], o.squash_scale, o.squash_kappa);
        }
        gnorm += norm2(g.phase);
        cur.phases = torus_retract(cur.phases, step);
      }
      (void)ascent_gradient(objective, cur, g);
      gnorm += norm2(g.power);
      std::vector<double> a_tilde(cur.a);
      const double eta = o.power_step * budget;
      for (std::size_t k = 0; k < a_tilde.size(); ++k) a_tilde[k] += eta * g.power[k];
      cur.a = power_project(a_tilde, budget);
      gnorm = std::sqrt(gnorm);
    }
    const double v = objective.value(cur);
    if (!std::isfinite(v)) throw NumericalError("objective returned a non-finite value");
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    res.trace.push(v, gnorm, secs);
    if (v > res.value) {
      res.value = v;
      res.point = cur;
    }
    if (window_converged(res.trace, o)) break;
  }
  res.iterations = res.trace.iterations();
  res.continuous_value = res.value;
  return res;
}

SimhaclResult simhacl_optimize(Objective& objective, const em::PhaseTensor& init,
                               const SimhaclOptions& o, SeededRng& rng) {
  o.validate();
  if (init.layers() != objective.layers() || init.atoms() != objective.atoms()) {
    throw DimensionError("simhacl_optimize: initial phases do not match the objective");
  }
  const std::size_t restarts = o.optimize_phases ? o.restarts : 1;
  SimhaclResult best;
  bool have = false;
  OptimizerTrace all;
  std::vector<ProductManifoldPoint> points;
  std::size_t total = 0;
  for (std::size_t r = 0; r < restarts; ++r) {
    const em::PhaseTensor phases =
        r == 0 ? init : em::PhaseTensor::random(objective.layers(), objective.atoms(), rng);
    SimhaclResult run =
        simhacl_single(objective, equal_power_point(phases, objective.users(), objective.budget()),
                       o);
    all.append(run.trace);
    total += run.iterations;
    points.push_back(run.point);
    if (o.codebook) {
      run.value = objective.quantize(run.point, *o.codebook, o.polish ? o.polish_sweeps : 0);
    }
    if (!have || run.value > best.value) {
      best = std::move(run);
      best.best_restart = r;
      have = true;
    }
  }
  best.trace = std::move(all);
  best.iterations = total;
  best.restart_points = std::move(points);
  return best;
}

}  // namespace simsec::manifold
