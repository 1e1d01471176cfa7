// Acceptance checks A1..A9. Each prints one line:
//   <id> PASS|FAIL <detail>
// Soft targets print SOFT-PASS / SOFT-FAIL lines and never change the exit code.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "simsec/experiment.hpp"
#include "simsec/mhacl.hpp"
#include "simsec/results_csv.hpp"
#include "simsec/simhacl.hpp"
#include "test_support.hpp"

using namespace simsec;
using simsec::fixtures::Instance;
using simsec::fixtures::make_instance;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

void soft(const char* id, bool ok, const std::string& what) {
  std::printf("%s %s %s\n", id, ok ? "SOFT-PASS" : "SOFT-FAIL", what.c_str());
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<bool> clamp_pattern(secrecy::WssrEvaluator& ev, const em::PhaseTensor& phi,
                                std::span<const double> a) {
  const auto rep = ev.report(phi, a);
  std::vector<bool> p;
  for (double r : rep.raw_rate) p.push_back(r >= 0.0);
  return p;
}

// ---------------------------------------------------------------------------

Outcome a1_gradient_oracle() {
  const double step = 1e-6;
  double worst = 0.0;
  std::size_t excluded = 0, compared = 0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    const std::size_t k = 1 + i % 4;
    const std::size_t m = 1 + (i / 4) % 3;
    const std::size_t side = (i / 12) % 2 == 0 ? 2 : 4;
    Instance in = make_instance(k, m, side, side, 90000 + i);
    secrecy::WssrEvaluator ev(in.task);
    secrecy::GradientBundle g;
    (void)ev.gradient(in.phases, in.a, g);
    const auto base = clamp_pattern(ev, in.phases, in.a);

    auto check = [&](const std::vector<double>& analytic, const std::vector<double>& fd,
                     auto&& perturbed_pattern) {
      for (std::size_t c = 0; c < fd.size(); ++c) {
        if (perturbed_pattern(c, +1) != base || perturbed_pattern(c, -1) != base) {
          ++excluded;
          continue;
        }
        ++compared;
        const double diff = std::fabs(analytic[c] - fd[c]);
        worst = std::max(worst, fd[c] == 0.0 ? diff : diff / std::fabs(fd[c]));
      }
    };
    const auto fd_a =
        secrecy::fd_gradient(in.task, in.phases, in.a, secrecy::FdTarget::Power, step);
    check(g.power, fd_a, [&](std::size_t c, int s) {
      std::vector<double> a = in.a;
      a[c] += s * step;
      return clamp_pattern(ev, in.phases, a);
    });
    const auto fd_p =
        secrecy::fd_gradient(in.task, in.phases, in.a, secrecy::FdTarget::Phase, step);
    check(g.phase, fd_p, [&](std::size_t c, int s) {
      std::vector<double> raw(in.phases.values().begin(), in.phases.values().end());
      raw[c] += s * step;
      return clamp_pattern(ev, em::PhaseTensor(in.phases.layers(), in.phases.atoms(), raw), in.a);
    });
  }
  return {worst < 1e-5, fmt("max relative error %.3g over %.0f coordinates", worst, compared) +
                            " (" + std::to_string(excluded) + " at a clamp switch)"};
}

// Exhaustive maximum over 4^4 codeword phases x 21-point power split.
double exhaustive_max(secrecy::WssrEvaluator& ev, const manifold::QuantizationCodebook& cb,
                      double budget) {
  double best = 0.0;
  const std::size_t q = cb.codewords.size();
  for (std::size_t code = 0; code < q * q * q * q; ++code) {
    std::vector<double> ph(4);
    std::size_t c = code;
    for (auto& p : ph) {
      p = cb.codewords[c % q];
      c /= q;
    }
    const em::PhaseTensor pt(1, 4, ph);
    for (int i = 0; i <= 20; ++i) {
      const double f = i / 20.0;
      const std::vector<double> a{std::sqrt(f * budget), std::sqrt((1 - f) * budget)};
      best = std::max(best, ev.value(pt, a));
    }
  }
  return best;
}

Outcome a2_exhaustive() {
  const auto cb = manifold::QuantizationCodebook::make(2);
  std::vector<double> ratios;
  std::size_t zero = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Instance in = make_instance(2, 1, 2, 2, 91000 + seed);
    manifold::WssrObjective obj(in.task);
    const double best = exhaustive_max(obj.evaluator(), cb, in.task.budget);
    manifold::SimhaclOptions o;
    o.restarts = 8;
    o.codebook = cb;
    SeededRng rng(seed, {0, seed, 3});
    const auto r = manifold::simhacl_optimize(obj, in.phases, o, rng);
    if (best <= 0.0) {
      ++zero;
      ratios.push_back(1.0);
    } else {
      ratios.push_back(r.value / best);
    }
  }
  const double med = median(ratios);
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  return {med >= 0.9, fmt("median ratio %.4f (range %.4f..%.4f)", med, *lo, *hi) + ", " +
                          std::to_string(zero) +
                          " seeds with zero exhaustive maximum"};
}

Outcome a3_power_saturation() {
  int used = 0, boundary = 0;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> failures;
  while (used < 50 && seed < 5000) {
    Instance in = make_instance(2, 2, 2, 2, 92000 + seed++);
    secrecy::WssrEvaluator ev(in.task);
    double best = -1.0;
    int bi = 0, bj = 0;
    for (int i = 0; i <= 20; ++i)
      for (int j = 0; i + j <= 20; ++j) {
        const double p = in.task.budget / 20.0;
        const std::vector<double> a{std::sqrt(i * p), std::sqrt(j * p)};
        const double v = ev.value(in.phases, a);
        if (v > best) {
          best = v;
          bi = i;
          bj = j;
        }
      }
    if (!(best > 0.0)) continue;
    ++used;
    if (bi + bj >= 19) ++boundary;
    else failures.push_back(seed - 1);
  }
  std::string detail = std::to_string(boundary) + "/" + std::to_string(used) +
                       " maximizers within one grid step of the boundary";
  if (!failures.empty()) detail += " (first interior maximizer at seed offset " + std::to_string(failures.front()) + ")";
  return {used == 50 && boundary == used, detail};
}

Outcome a4_invariances() {
  double worst_phase = 0.0, worst_scale = 0.0;
  SeededRng rng(4, {});
  for (std::uint64_t i = 0; i < 100; ++i) {
    Instance in = make_instance(1 + i % 4, 1 + i % 3, 2 + i % 3, 2, 93000 + i);
    secrecy::WssrEvaluator ev(in.task);
    const double base = ev.value(in.phases, in.a);
    const double denom = std::max(base, 1e-300);
    const std::size_t m = rng.uniform_index(in.phases.layers());
    const double c = rng.uniform(-10, 10);
    auto shifted = in.phases;
    for (std::size_t n = 0; n < shifted.atoms(); ++n) shifted.set(m, n, shifted(m, n) + c);
    const double vs = ev.value(shifted, in.a);
    worst_phase = std::max(worst_phase, base == 0 ? std::fabs(vs) : std::fabs(vs - base) / denom);

    const double t = std::exp(rng.uniform(-8, 8));
    secrecy::Task scaled = in.task;
    for (auto& s : scaled.noise) s *= t;
    scaled.eve_noise *= t;
    std::vector<double> a = in.a;
    for (auto& x : a) x *= std::sqrt(t);
    secrecy::WssrEvaluator ev2(scaled);
    const double vt = ev2.value(in.phases, a);
    worst_scale = std::max(worst_scale, base == 0 ? std::fabs(vt) : std::fabs(vt - base) / denom);
  }
  return {worst_phase < 1e-9 && worst_scale < 1e-9,
          fmt("max relative change: layer phase %.3g, power/noise scaling %.3g", worst_phase,
              worst_scale)};
}

Outcome a5_channel_statistics() {
  SystemConfig cfg;
  cfg.users = cfg.antennas = 1;
  cfg.layers = 1;
  cfg.atoms_x = cfg.atoms_y = 4;
  const auto sys = em::build_system(cfg);
  SeededRng rng(5, {5, 0, 1});
  const std::size_t n = 16;
  const int draws = 100000;
  std::vector<em::Complex> acc(n * n);
  for (int t = 0; t < draws; ++t) {
    const auto s = em::sample_scenario(cfg, sys.correlation, rng);
    const double inv = 1.0 / s.user_gain[0];
    const auto& h = s.users[0];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) acc[i * n + j] += h[i] * std::conj(h[j]) * inv;
  }
  double diff = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const em::Complex r = sys.correlation.r(i, j);
      diff += std::norm(acc[i * n + j] / double(draws) - r);
      ref += std::norm(r);
    }
  const double rel = std::sqrt(diff / ref);
  return {rel < 0.05, fmt("relative Frobenius error %.4f (β-normalized, N = 16, 1e5 draws)", rel)};
}

// ---------------------------------------------------------------------------
// A6: Monte-Carlo trend targets at the default scenario.

bench::RunConfig trend_config(bench::ExperimentKind kind, std::vector<double> sweep,
                              std::vector<bench::Scheme> schemes) {
  bench::RunConfig cfg;
  cfg.optimizer.restarts = 1;
  cfg.experiment.kind = kind;
  cfg.experiment.sweep = std::move(sweep);
  cfg.experiment.schemes = std::move(schemes);
  cfg.experiment.trials = 100;
  cfg.experiment.seed = 2024;
  return cfg;
}

struct Cell {
  double mean = 0.0;
  double se = 0.0;
};

std::map<std::pair<std::string, double>, Cell> cells(const bench::RunConfig& cfg) {
  const auto out = bench::run_experiment(cfg, bench::default_workers());
  std::map<std::pair<std::string, double>, Cell> m;
  for (const auto& s : bench::summarize(out.rows))
    m[{s.scheme, s.sweep_value}] = {s.mean, s.sd / std::sqrt(double(s.n))};
  return m;
}

Outcome a6_trends() {
  using bench::ExperimentKind;
  using bench::Scheme;
  const auto t0 = std::chrono::steady_clock::now();

  const auto atoms = cells(trend_config(ExperimentKind::Atoms, {16, 64},
                                        {Scheme::Simhacl, Scheme::PowerOnly}));
  const double r1 = atoms.at({"simhacl", 64}).mean / atoms.at({"simhacl", 16}).mean;
  soft("A6(i)", r1 >= 2.0, fmt("WSSR(N=64)/WSSR(N=16) = %.3f at M = 4 (target >= 2.0)", r1));

  const auto layers = cells(trend_config(ExperimentKind::Layers, {2, 6}, {Scheme::Simhacl}));
  const double r2 = layers.at({"simhacl", 6}).mean / layers.at({"simhacl", 2}).mean;
  soft("A6(ii)", r2 >= 1.3, fmt("WSSR(M=6)/WSSR(M=2) = %.3f at N = 64 (target >= 1.3)", r2));

  const auto bits = cells(trend_config(ExperimentKind::Bits, {1, 2, 3, 4, 0}, {Scheme::Simhacl}));
  bool mono = true;
  std::string means;
  for (int b = 1; b <= 4; ++b) {
    const Cell c = bits.at({"simhacl", double(b)});
    means += fmt("b%.0f=%.3f ", b, c.mean);
    if (b > 1) {
      const Cell p = bits.at({"simhacl", double(b - 1)});
      if (c.mean < p.mean - std::hypot(c.se, p.se)) mono = false;
    }
  }
  const double cont = bits.at({"simhacl", 0.0}).mean;
  const double b4 = bits.at({"simhacl", 4.0}).mean / cont;
  soft("A6(iii)", mono && b4 >= 0.9,
       means + fmt("cont=%.3f; b4/continuous = %.3f (non-decreasing: ", cont, b4) +
           (mono ? "yes)" : "no)"));

  const double r4 = atoms.at({"simhacl", 64}).mean / atoms.at({"power-only", 64}).mean;
  soft("A6(iv)", r4 >= 1.5, fmt("simhacl/power-only = %.3f at N = 64, M = 4 (target >= 1.5)", r4));

  const auto users = cells(trend_config(ExperimentKind::Users, {2, 3, 4, 5, 6, 7, 8},
                                        {Scheme::Simhacl}));
  double best = -1.0;
  int arg = 0;
  std::string curve;
  for (int k = 2; k <= 8; ++k) {
    const double v = users.at({"simhacl", double(k)}).mean;
    curve += fmt("K%.0f=%.3f ", k, v);
    if (v > best) {
      best = v;
      arg = k;
    }
  }
  soft("A6(v)", arg > 2 && arg < 8,
       curve + "(maximum at K = " + std::to_string(arg) + ", target strictly inside 2..8)");

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {true, fmt("soft trend targets reported above (%.0f s, 100 trials per cell)", secs)};
}

// ---------------------------------------------------------------------------

double r_squared(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = double(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return syy == 0 ? 1.0 : sxy * sxy / (sxx * syy);
}

Outcome a7_timing() {
  bench::RunConfig cfg;
  cfg.experiment.kind = bench::ExperimentKind::Timing;
  cfg.experiment.sweep = {2, 4, 6, 8};
  cfg.experiment.schemes = {bench::Scheme::Simhacl, bench::Scheme::Mhacl};
  const auto rows = bench::run_timing(cfg);
  std::map<std::string, std::vector<double>> ms, p50;
  double sim4 = 0, mh4 = 0;
  for (const auto& r : rows) {
    ms[r.scheme].push_back(double(r.layers));
    p50[r.scheme].push_back(r.p50_s);
    if (r.layers == 4 && r.scheme == "simhacl") sim4 = r.p50_s;
    if (r.layers == 4 && r.scheme == "mhacl") mh4 = r.p50_s;
  }
  const double r2s = r_squared(ms["simhacl"], p50["simhacl"]);
  const double r2m = r_squared(ms["mhacl"], p50["mhacl"]);
  bool sim_le = true;
  for (std::size_t i = 0; i < p50["simhacl"].size(); ++i)
    sim_le = sim_le && p50["simhacl"][i] <= p50["mhacl"][i];
  soft("A7", sim4 <= 0.8 * mh4, fmt("simhacl/mhacl p50 = %.3f at M = 4 (target <= 0.8)", sim4 / mh4));
  soft("A7", sim4 < 0.05, fmt("simhacl p50 = %.3g ms at M = 4, N = 64 (target < 50 ms)", sim4 * 1e3));
  std::string detail = fmt("R^2 linear in M: simhacl %.4f, mhacl %.4f; ", r2s, r2m) +
                       fmt("p50 at M=4: simhacl %.3g ms, mhacl %.3g ms", sim4 * 1e3, mh4 * 1e3);
  return {r2s > 0.9 && r2m > 0.9 && sim_le, detail + (sim_le ? "" : "; simhacl slower somewhere")};
}

Outcome a8_reduction() {
  double worst = 0.0;
  std::size_t points = 0;
  for (std::uint64_t i = 0; i < 10; ++i) {
    Instance in = make_instance(2 + i % 3, 1 + i % 4, 3, 3, 94000 + i);
    manifold::WssrObjective a(in.task), b(in.task);
    mhacl::MetaConfig cfg;
    cfg.epochs = 5;
    cfg.outer = 3;
    cfg.inner = 10;
    cfg.alpha_power = cfg.alpha_phase = 0.0;
    auto state = mhacl::ContinualState::initial(in.cfg.users, in.cfg.layers, 3, 3, cfg);
    manifold::Objective* tasks[] = {&a};
    SeededRng rng(i, {});
    const auto res = mhacl::mhacl_run(tasks, in.phases, cfg, state, rng);

    manifold::SimhaclOptions o;
    o.rule = manifold::StepRule::Alternating;
    o.restarts = 1;
    o.early_stop = false;
    o.max_iterations = cfg.epochs * cfg.outer * cfg.inner;
    o.squash_scale = cfg.psn_scale;
    o.squash_kappa = cfg.psn_kappa;
    o.power_step = cfg.pan_rate;
    SeededRng rng2(i, {});
    const auto sim = manifold::simhacl_optimize(b, in.phases, o, rng2);
    if (sim.trace.iterations() != res.trace.iterations()) {
      return {false, "trace lengths differ on instance " + std::to_string(i)};
    }
    for (std::size_t t = 0; t < sim.trace.iterations(); ++t) {
      const double d = std::fabs(res.trace.wssr[t] - sim.trace.wssr[t]) /
                       std::max(1.0, std::fabs(sim.trace.wssr[t]));
      worst = std::max(worst, d);
      ++points;
    }
  }
  return {worst <= 1e-10, fmt("max trace deviation %.3g over %.0f iterations", worst, points)};
}

Outcome a9_determinism() {
  const char* yaml = R"(
scenario:
  antennas: 3
  users: 3
  layers: 2
  atoms_x: 3
  atoms_y: 3
optimizer:
  max_iterations: 60
  restarts: 2
mhacl:
  epochs: 2
  outer: 2
  inner: 5
  spsa_samples: 2
experiment:
  kind: bits
  sweep: [1, 2, continuous]
  trials: 4
  schemes: [simhacl, mhacl, mhacl-b2, power-only, random-all]
  seed: 99
)";
  auto render = [&](std::size_t workers) {
    const auto cfg = bench::run_config_from_string(yaml);
    const auto out = bench::run_experiment(cfg, workers);
    const bench::Provenance prov{"acceptance", cfg.hash(), cfg.experiment.seed};
    std::ostringstream s;
    bench::write_results(s, prov, out.rows);
    bench::write_summary(s, prov, bench::summarize(out.rows));
    return s.str();
  };
  auto render_conv = [&](std::size_t workers) {
    auto cfg = bench::run_config_from_string(yaml);
    cfg.experiment.kind = bench::ExperimentKind::Convergence;
    cfg.experiment.sweep.clear();
    const auto out = bench::run_experiment(cfg, workers);
    std::ostringstream s;
    bench::write_traces(s, {"acceptance", cfg.hash(), 99}, out.traces);
    return s.str();
  };
  const std::string a = render(1), b = render(1), c = render(4);
  const std::string d = render_conv(1), e = render_conv(3);
  const bool same = a == b && a == c && d == e;
  return {same, std::to_string(a.size() + d.size()) + " bytes compared across reruns and worker counts"};
}

const std::vector<std::pair<const char*, std::function<Outcome()>>> kCriteria = {
    {"A1", a1_gradient_oracle}, {"A2", a2_exhaustive},        {"A3", a3_power_saturation},
    {"A4", a4_invariances},     {"A5", a5_channel_statistics}, {"A6", a6_trends},
    {"A7", a7_timing},          {"A8", a8_reduction},          {"A9", a9_determinism},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> wanted(argv + 1, argv + argc);
  bool all_ok = true;
  for (const auto& [id, fn] : kCriteria) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), id) == wanted.end()) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    all_ok = all_ok && o.pass;
  }
  return all_ok ? 0 : 1;
}
