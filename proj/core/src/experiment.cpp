#include "simsec/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include "simsec/errors.hpp"
#include "simsec/manifold.hpp"
#include "yaml_fields.hpp"

namespace simsec::bench {
namespace {

constexpr std::pair<ExperimentKind, const char*> kKindNames[] = {
    {ExperimentKind::Convergence, "convergence"}, {ExperimentKind::Layers, "layers"},
    {ExperimentKind::Atoms, "atoms"},             {ExperimentKind::Bits, "bits"},
    {ExperimentKind::Users, "users"},             {ExperimentKind::Power, "power"},
    {ExperimentKind::Timing, "timing"},
};

constexpr std::pair<Scheme, const char*> kSchemeNames[] = {
    {Scheme::Simhacl, "simhacl"},     {Scheme::Mhacl, "mhacl"},
    {Scheme::MhaclB1, "mhacl-b1"},    {Scheme::MhaclB2, "mhacl-b2"},
    {Scheme::MhaclB4, "mhacl-b4"},    {Scheme::PowerOnly, "power-only"},
    {Scheme::RandomAll, "random-all"},
};

std::uint64_t stream_experiment(ExperimentKind kind) { return static_cast<std::uint64_t>(kind) + 1; }

enum Purpose : std::uint64_t { kChannel = 1, kInit = 2, kSchemeBase = 16 };
constexpr std::size_t kTimingRounds = 50;

std::size_t integral(double v, const char* what) {
  if (!(v >= 1.0) || v != std::floor(v)) {
    throw ConfigError(std::string(what) + " must be a positive integer");
  }
  return static_cast<std::size_t>(v);
}

std::optional<int> scheme_bits(Scheme s) {
  switch (s) {
    case Scheme::MhaclB1: return 1;
    case Scheme::MhaclB2: return 2;
    case Scheme::MhaclB4: return 4;
    default: return std::nullopt;
  }
}

mhacl::ContinualState fresh_state(const SystemConfig& sc, const mhacl::MetaConfig& meta) {
  const auto [rows, cols] = mhacl::grid_shape(sc.atoms(), sc.atoms_x, sc.atoms_y);
  return mhacl::ContinualState::initial(sc.users, sc.layers, rows, cols, meta);
}

/// Best quantized value over a set of continuous points.
manifold::ProductManifoldPoint best_quantized(manifold::WssrObjective& obj,
                                              const std::vector<manifold::ProductManifoldPoint>& pts,
                                              int bits, const RunConfig& cfg) {
  const auto cb = manifold::QuantizationCodebook::make(bits, cfg.codebook_mode);
  const std::size_t sweeps = cfg.optimizer.polish ? cfg.optimizer.polish_sweeps : 0;
  manifold::ProductManifoldPoint best;
  double best_v = -1.0;
  for (const auto& p : pts) {
    manifold::ProductManifoldPoint q = p;
    const double v = obj.quantize(q, cb, sweeps);
    if (v > best_v) {
      best_v = v;
      best = std::move(q);
    }
  }
  return best;
}

em::PhaseTensor frozen_phases(const RunConfig& cfg, const SystemConfig& sc, SeededRng& rng) {
  if (cfg.experiment.power_only_phases == PowerOnlyPhases::Torus) {
    return em::PhaseTensor::random(sc.layers, sc.atoms(), rng);
  }
  const auto cb = manifold::QuantizationCodebook::make(sc.bits.value_or(2), cfg.codebook_mode);
  em::PhaseTensor p(sc.layers, sc.atoms());
  std::vector<int> idx(p.size());
  for (std::size_t m = 0; m < sc.layers; ++m)
    for (std::size_t n = 0; n < sc.atoms(); ++n) {
      const auto i = rng.uniform_index(cb.codewords.size());
      idx[m * sc.atoms() + n] = static_cast<int>(i);
      p.set(m, n, cb.codewords[i]);
    }
  p.mark_quantized(std::move(idx));
  return p;
}

struct MhaclOutcome {
  manifold::ProductManifoldPoint best;
  manifold::OptimizerTrace trace;
};

MhaclOutcome run_mhacl(const RunConfig& cfg, const SystemConfig& sc, manifold::WssrObjective& obj,
                       const em::PhaseTensor& init, SeededRng& rng) {
  mhacl::ContinualState state = fresh_state(sc, cfg.meta);
  manifold::Objective* tasks[] = {&obj};
  mhacl::MhaclResult r = mhacl::mhacl_run(tasks, init, cfg.meta, state, rng);
  return {std::move(r.tasks.front().best), std::move(r.trace)};
}

std::vector<double> sorted_copy(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  for (const auto& [k, n] : kKindNames)
    if (k == kind) return n;
  return "unknown";
}

std::string to_string(Scheme scheme) {
  for (const auto& [s, n] : kSchemeNames)
    if (s == scheme) return n;
  return "unknown";
}

ExperimentKind parse_kind(const std::string& name) {
  for (const auto& [k, n] : kKindNames)
    if (name == n) return k;
  throw ConfigError("unknown experiment kind '" + name + "'");
}

Scheme parse_scheme(const std::string& name) {
  for (const auto& [s, n] : kSchemeNames)
    if (name == n) return s;
  throw ConfigError("unknown scheme '" + name + "'");
}

std::vector<Scheme> parse_schemes(const std::string& list) {
  std::vector<Scheme> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError("empty entry in scheme list '" + list + "'");
    out.push_back(parse_scheme(item.substr(b, e - b + 1)));
  }
  if (out.empty()) throw ConfigError("scheme list is empty");
  return out;
}

std::vector<double> default_sweep(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Convergence: return {0.0};
    case ExperimentKind::Layers: return {2, 3, 4, 5, 6, 7, 8};
    case ExperimentKind::Atoms: return {16, 36, 64, 100};
    case ExperimentKind::Bits: return {1, 2, 3, 4, 0};
    case ExperimentKind::Users: return {2, 3, 4, 5, 6, 7, 8};
    case ExperimentKind::Power: return {20, 25, 30, 35, 40};
    case ExperimentKind::Timing: return {2, 4, 6, 8};
  }
  return {};
}

std::vector<double> ExperimentSpec::sweep_values() const {
  return sweep.empty() ? default_sweep(kind) : sweep;
}

void ExperimentSpec::validate() const {
  if (trials == 0) throw ConfigError("experiment.trials must be >= 1");
  if (schemes.empty()) throw ConfigError("experiment.schemes must not be empty");
  if (timing_iterations == 0) throw ConfigError("experiment.timing_iterations must be >= 1");
  const auto values = sweep_values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (values[i] == values[j]) throw ConfigError("experiment.sweep has duplicate values");
    }
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw ConfigError("experiment.sweep values must be finite");
    (void)apply_sweep(SystemConfig{}, kind, v);
  }
}

std::uint64_t fnv1a(const std::string& text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t RunConfig::hash() const {
  return fnv1a(overrides.empty() ? source : source + "\n#overrides " + overrides);
}

void RunConfig::validate() const {
  scenario.validate();
  optimizer.validate();
  meta.validate();
  experiment.validate();
  for (double v : experiment.sweep_values()) apply_sweep(scenario, experiment.kind, v).validate();
}

RunConfig run_config_from_string(const std::string& yaml_text) {
  const YAML::Node root = detail::load_yaml_text(yaml_text);
  if (root && !root.IsNull() && !root.IsMap()) throw ConfigError("config root must be a mapping");
  detail::FieldReader top(root, "config");
  RunConfig cfg;
  cfg.source = yaml_text;

  detail::read_system_config(top.get("scenario"), cfg.scenario);

  {
    detail::FieldReader r(top.get("optimizer"), "optimizer");
    auto& o = cfg.optimizer;
    r.read("max_iterations", o.max_iterations);
    r.read("window", o.window);
    r.read("tolerance", o.tolerance);
    r.read("early_stop", o.early_stop);
    r.read("restarts", o.restarts);
    if (auto v = r.get("rule")) {
      const auto s = v.as<std::string>();
      if (s == "joint-adam") o.rule = manifold::StepRule::JointAdam;
      else if (s == "alternating") o.rule = manifold::StepRule::Alternating;
      else throw ConfigError("optimizer.rule must be 'joint-adam' or 'alternating'");
    }
    r.read("phase_lr", o.phase_lr);
    r.read("power_lr", o.power_lr);
    r.read("squash_scale", o.squash_scale);
    r.read("squash_kappa", o.squash_kappa);
    r.read("power_step", o.power_step);
    r.read("polish", o.polish);
    r.read("polish_sweeps", o.polish_sweeps);
    if (auto v = r.get("codebook_mode")) {
      const auto s = v.as<std::string>();
      if (s == "full-circle") cfg.codebook_mode = manifold::CodebookMode::FullCircle;
      else if (s == "half-circle") cfg.codebook_mode = manifold::CodebookMode::HalfCircle;
      else throw ConfigError("optimizer.codebook_mode must be 'full-circle' or 'half-circle'");
    }
    r.finish();
  }

  {
    detail::FieldReader r(top.get("mhacl"), "mhacl");
    auto& m = cfg.meta;
    r.read("epochs", m.epochs);
    r.read("outer", m.outer);
    r.read("inner", m.inner);
    r.read("psn_period", m.psn_period);
    r.read("alpha_power", m.alpha_power);
    r.read("alpha_phase", m.alpha_phase);
    r.read("spsa_samples", m.spsa_samples);
    r.read("spsa_scale", m.spsa_scale);
    r.read("pan_rate", m.pan_rate);
    r.read("psn_scale", m.psn_scale);
    r.read("psn_kappa", m.psn_kappa);
    r.read("lambda_reg", m.lambda_reg);
    r.read("beta_traj", m.beta_traj);
    r.read("snapshot_decay", m.snapshot_decay);
    r.read("mask_decay", m.mask_decay);
    r.read("interference_decay", m.interference_decay);
    r.read("buffer_capacity", m.buffer_capacity);
    r.read("buffer_temperature", m.buffer_temperature);
    r.read("buffer_batch", m.buffer_batch);
    r.finish();
  }

  {
    detail::FieldReader r(top.get("experiment"), "experiment");
    auto& e = cfg.experiment;
    if (auto v = r.get("kind")) e.kind = parse_kind(v.as<std::string>());
    if (auto v = r.get("sweep")) {
      if (!v.IsSequence()) throw ConfigError("experiment.sweep must be a list");
      e.sweep.clear();
      for (const auto& item : v) {
        const auto text = item.as<std::string>();
        if (text == "continuous") {
          e.sweep.push_back(0.0);
          continue;
        }
        try {
          e.sweep.push_back(item.as<double>());
        } catch (const YAML::Exception&) {
          throw ConfigError("experiment.sweep entry '" + text + "' is not a number");
        }
      }
    }
    r.read("trials", e.trials);
    if (auto v = r.get("schemes")) {
      if (v.IsSequence()) {
        e.schemes.clear();
        for (const auto& item : v) e.schemes.push_back(parse_scheme(item.as<std::string>()));
      } else {
        e.schemes = parse_schemes(v.as<std::string>());
      }
    }
    r.read("seed", e.seed);
    if (auto v = r.get("out")) e.out = v.as<std::string>();
    if (auto v = r.get("power_only_phases")) {
      const auto s = v.as<std::string>();
      if (s == "torus") e.power_only_phases = PowerOnlyPhases::Torus;
      else if (s == "codebook") e.power_only_phases = PowerOnlyPhases::Codebook;
      else throw ConfigError("experiment.power_only_phases must be 'torus' or 'codebook'");
    }
    r.read("timing_iterations", e.timing_iterations);
    r.read("timing_warmup", e.timing_warmup);
    r.finish();
  }
  top.finish();
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return run_config_from_string(text.str());
}

SystemConfig apply_sweep(const SystemConfig& base, ExperimentKind kind, double value) {
  SystemConfig c = base;
  switch (kind) {
    case ExperimentKind::Convergence:
      break;
    case ExperimentKind::Layers:
    case ExperimentKind::Timing:
      c.layers = integral(value, "layer count");
      break;
    case ExperimentKind::Atoms: {
      const std::size_t n = integral(value, "atom count");
      const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
      if (side * side != n) throw ConfigError("atom count must be a perfect square");
      c.atoms_x = c.atoms_y = side;
      break;
    }
    case ExperimentKind::Bits:
      if (value == 0.0) {
        c.bits.reset();
      } else {
        c.bits = static_cast<int>(integral(value, "bit depth"));
      }
      break;
    case ExperimentKind::Users: {
      const std::size_t k = integral(value, "user count");
      c.users = c.antennas = k;
      if (!c.weights.empty() && c.weights.size() != k) {
        throw ConfigError("per-user weights cannot be combined with a users sweep");
      }
      break;
    }
    case ExperimentKind::Power:
      c.total_power_w = dbm_to_watt(value);
      break;
  }
  c.validate();
  return c;
}

SchemeOutcome run_scheme(const RunConfig& cfg, const SystemConfig& sc, const secrecy::Task& task,
                         Scheme scheme, const em::PhaseTensor& init, SeededRng& rng) {
  manifold::WssrObjective obj(task);
  SchemeOutcome out;
  manifold::ProductManifoldPoint point;
  switch (scheme) {
    case Scheme::Simhacl: {
      manifold::SimhaclOptions o = cfg.optimizer;
      if (sc.bits) o.codebook = manifold::QuantizationCodebook::make(*sc.bits, cfg.codebook_mode);
      auto r = manifold::simhacl_optimize(obj, init, o, rng);
      point = std::move(r.point);
      out.iterations = r.iterations;
      out.trace = std::move(r.trace);
      break;
    }
    case Scheme::Mhacl:
    case Scheme::MhaclB1:
    case Scheme::MhaclB2:
    case Scheme::MhaclB4: {
      MhaclOutcome r = run_mhacl(cfg, sc, obj, init, rng);
      point = std::move(r.best);
      out.iterations = r.trace.iterations();
      out.trace = std::move(r.trace);
      const std::optional<int> bits = scheme == Scheme::Mhacl ? sc.bits : scheme_bits(scheme);
      if (bits) point = best_quantized(obj, {point}, *bits, cfg);
      break;
    }
    case Scheme::PowerOnly: {
      manifold::SimhaclOptions o = cfg.optimizer;
      o.optimize_phases = false;
      o.codebook.reset();
      o.restarts = 1;
      auto r = manifold::simhacl_optimize(obj, frozen_phases(cfg, sc, rng), o, rng);
      point = std::move(r.point);
      out.iterations = r.iterations;
      out.trace = std::move(r.trace);
      break;
    }
    case Scheme::RandomAll:
      point = manifold::equal_power_point(em::PhaseTensor::random(sc.layers, sc.atoms(), rng),
                                          sc.users, task.budget);
      break;
  }
  point.validate(1e-9);
  out.report = obj.evaluator().report(point.phases, point.a);
  return out;
}

secrecy::SecrecyReport run_baselines(const RunConfig& cfg, const SystemConfig& sc,
                                     const secrecy::Task& task, Scheme scheme, SeededRng& rng) {
  SeededRng init_rng = rng.derive(kInit);
  const em::PhaseTensor init = em::PhaseTensor::random(sc.layers, sc.atoms(), init_rng);
  return run_scheme(cfg, sc, task, scheme, init, rng).report;
}

std::size_t default_workers() {
  if (const char* env = std::getenv("SIMSEC_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw ConfigError("SIMSEC_WORKERS must be a positive integer");
    }
    return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

struct WorkUnit {
  std::size_t value_index = 0;  // unused for bits sweeps of simhacl/mhacl
  std::size_t scheme_index = 0;
  std::size_t trial = 0;
  bool all_values = false;      // one continuous run serves every bit depth
};

template <typename F>
void parallel_for(std::size_t n, std::size_t workers, F&& body) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
}

ResultRow make_row(const RunConfig& cfg, Scheme scheme, double value, std::size_t trial,
                   const secrecy::SecrecyReport& rep, std::size_t iterations) {
  ResultRow row;
  row.experiment = to_string(cfg.experiment.kind);
  row.scheme = to_string(scheme);
  row.sweep_value = value;
  row.trial = trial;
  row.wssr = rep.wssr;
  row.iterations = iterations;
  row.rates = rep.rate;
  row.qos = rep.qos_ok;
  return row;
}

}  // namespace

ExperimentOutput run_experiment(const RunConfig& cfg, std::size_t workers) {
  cfg.validate();
  const ExperimentSpec& spec = cfg.experiment;
  if (spec.kind == ExperimentKind::Timing) {
    throw ConfigError("timing experiments are run with run_timing");
  }
  const std::vector<double> values = spec.sweep_values();
  const bool convergence = spec.kind == ExperimentKind::Convergence;

  RunConfig local = cfg;
  if (convergence) {
    // Full-length single-restart traces so that iterations line up across trials.
    local.optimizer.restarts = 1;
    local.optimizer.early_stop = false;
  }

  // One system per distinct geometry.
  std::vector<SystemConfig> scenarios;
  std::vector<std::shared_ptr<const em::SimSystem>> systems;
  for (double v : values) {
    scenarios.push_back(apply_sweep(cfg.scenario, spec.kind, v));
    const SystemConfig& sc = scenarios.back();
    std::shared_ptr<const em::SimSystem> reuse;
    for (std::size_t j = 0; j + 1 < scenarios.size(); ++j) {
      const SystemConfig& o = scenarios[j];
      if (o.layers == sc.layers && o.atoms_x == sc.atoms_x && o.atoms_y == sc.atoms_y &&
          o.antennas == sc.antennas && o.carrier_hz == sc.carrier_hz &&
          o.thickness() == sc.thickness()) {
        reuse = systems[j];
        break;
      }
    }
    systems.push_back(reuse ? reuse : std::make_shared<const em::SimSystem>(em::build_system(sc)));
  }

  std::vector<WorkUnit> units;
  for (std::size_t s = 0; s < spec.schemes.size(); ++s) {
    const Scheme scheme = spec.schemes[s];
    const bool shared = spec.kind == ExperimentKind::Bits &&
                        (scheme == Scheme::Simhacl || scheme == Scheme::Mhacl);
    for (std::size_t t = 0; t < spec.trials; ++t) {
      if (shared) {
        units.push_back({0, s, t, true});
      } else {
        for (std::size_t vi = 0; vi < values.size(); ++vi) units.push_back({vi, s, t, false});
      }
    }
  }

  std::vector<std::vector<ResultRow>> rows(units.size());
  std::vector<manifold::OptimizerTrace> traces(convergence ? units.size() : 0);
  parallel_for(units.size(), workers, [&](std::size_t ui) {
    const WorkUnit& u = units[ui];
    const Scheme scheme = spec.schemes[u.scheme_index];
    const std::size_t vi = u.value_index;
    const SystemConfig& sc = scenarios[vi];
    const em::SimSystem& sys = *systems[vi];
    const std::uint64_t exp_id = stream_experiment(spec.kind);

    SeededRng chan_rng(spec.seed, {exp_id, u.trial, kChannel});
    em::ChannelSet channels = em::sample_scenario(sc, sys.correlation, chan_rng);
    auto prop = std::shared_ptr<const em::PropagationSet>(systems[vi], &systems[vi]->propagation);
    const secrecy::Task task = secrecy::make_task(sc, prop, std::move(channels));
    SeededRng init_rng(spec.seed, {exp_id, u.trial, kInit});
    const em::PhaseTensor init = em::PhaseTensor::random(sc.layers, sc.atoms(), init_rng);
    SeededRng rng(spec.seed,
                  {exp_id, u.trial, kSchemeBase + static_cast<std::uint64_t>(scheme)});

    if (!u.all_values) {
      SchemeOutcome o = run_scheme(local, sc, task, scheme, init, rng);
      rows[ui].push_back(make_row(local, scheme, values[vi], u.trial, o.report, o.iterations));
      if (convergence) traces[ui] = std::move(o.trace);
      return;
    }

    // Bits sweep: optimize once on the continuous torus, quantize per bit depth.
    manifold::WssrObjective obj(task);
    std::vector<manifold::ProductManifoldPoint> points;
    std::size_t iterations = 0;
    SystemConfig continuous = sc;
    continuous.bits.reset();
    if (scheme == Scheme::Simhacl) {
      manifold::SimhaclOptions o = local.optimizer;
      o.codebook.reset();
      auto r = manifold::simhacl_optimize(obj, init, o, rng);
      points = std::move(r.restart_points);
      iterations = r.iterations;
    } else {
      MhaclOutcome r = run_mhacl(local, continuous, obj, init, rng);
      points.push_back(std::move(r.best));
      iterations = r.trace.iterations();
    }
    for (double v : values) {
      manifold::ProductManifoldPoint p;
      if (v == 0.0) {
        double best = -1.0;
        for (const auto& q : points) {
          const double val = obj.value(q);
          if (val > best) {
            best = val;
            p = q;
          }
        }
      } else {
        p = best_quantized(obj, points, static_cast<int>(v), local);
      }
      rows[ui].push_back(make_row(local, scheme, v, u.trial,
                                  obj.evaluator().report(p.phases, p.a), iterations));
    }
  });

  ExperimentOutput out;
  for (auto& r : rows)
    for (auto& row : r) out.rows.push_back(std::move(row));
  std::stable_sort(out.rows.begin(), out.rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tuple(a.sweep_value, static_cast<int>(parse_scheme(a.scheme)), a.trial) <
           std::tuple(b.sweep_value, static_cast<int>(parse_scheme(b.scheme)), b.trial);
  });

  if (convergence) {
    for (std::size_t s = 0; s < spec.schemes.size(); ++s) {
      std::vector<double> sum_w, sum_b;
      std::vector<std::size_t> count;
      for (std::size_t ui = 0; ui < units.size(); ++ui) {
        if (units[ui].scheme_index != s) continue;
        const auto& tr = traces[ui];
        if (tr.iterations() > sum_w.size()) {
          sum_w.resize(tr.iterations(), 0.0);
          sum_b.resize(tr.iterations(), 0.0);
          count.resize(tr.iterations(), 0);
        }
        for (std::size_t i = 0; i < tr.iterations(); ++i) {
          sum_w[i] += tr.wssr[i];
          sum_b[i] += tr.best[i];
          ++count[i];
        }
      }
      for (std::size_t i = 0; i < sum_w.size(); ++i) {
        const double n = static_cast<double>(count[i]);
        out.traces.push_back({to_string(spec.schemes[s]), i, sum_w[i] / n, sum_b[i] / n});
      }
    }
  }
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  values = sorted_copy(std::move(values));
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<TimingRow> run_timing(const RunConfig& cfg) {
  cfg.validate();
  const ExperimentSpec& spec = cfg.experiment;

  struct Cell {
    SystemConfig sc;
    std::shared_ptr<const em::SimSystem> sys;
    secrecy::Task task;
    em::PhaseTensor init;
    Scheme scheme;
    std::vector<double> secs;
  };
  std::vector<Cell> cells;
  for (double v : spec.sweep_values()) {
    const SystemConfig sc = apply_sweep(cfg.scenario, ExperimentKind::Timing, v);
    auto sys = std::make_shared<const em::SimSystem>(em::build_system(sc));
    SeededRng chan_rng(spec.seed, {stream_experiment(ExperimentKind::Timing), 0, kChannel});
    em::ChannelSet channels = em::sample_scenario(sc, sys->correlation, chan_rng);
    auto prop = std::shared_ptr<const em::PropagationSet>(sys, &sys->propagation);
    const secrecy::Task task = secrecy::make_task(sc, prop, std::move(channels));
    SeededRng init_rng(spec.seed, {stream_experiment(ExperimentKind::Timing), 0, kInit});
    const em::PhaseTensor init = em::PhaseTensor::random(sc.layers, sc.atoms(), init_rng);
    for (Scheme scheme : spec.schemes) {
      if (scheme != Scheme::Simhacl && scheme != Scheme::Mhacl) continue;
      cells.push_back({sc, sys, task, init, scheme, {}});
    }
  }

  // Samples are collected in short interleaved rounds so that slow drift in
  // host speed is spread evenly over all cells instead of biasing one depth.
  const std::size_t rounds = std::min<std::size_t>(kTimingRounds, spec.timing_iterations);
  for (std::size_t round = 0; round < rounds; ++round) {
    const std::size_t take = spec.timing_iterations / rounds +
                             (round < spec.timing_iterations % rounds ? 1 : 0);
    const std::size_t needed = spec.timing_warmup + take;
    for (Cell& c : cells) {
      manifold::WssrObjective obj(c.task);
      SeededRng rng(spec.seed, {stream_experiment(ExperimentKind::Timing), round,
                                kSchemeBase + static_cast<std::uint64_t>(c.scheme)});
      manifold::OptimizerTrace trace;
      if (c.scheme == Scheme::Simhacl) {
        manifold::SimhaclOptions o = cfg.optimizer;
        o.restarts = 1;
        o.early_stop = false;
        o.max_iterations = needed;
        o.codebook.reset();
        trace = manifold::simhacl_optimize(obj, c.init, o, rng).trace;
      } else {
        RunConfig local = cfg;
        const std::size_t per_epoch = std::max<std::size_t>(1, local.meta.outer * local.meta.inner);
        local.meta.epochs = (needed + per_epoch - 1) / per_epoch;
        trace = run_mhacl(local, c.sc, obj, c.init, rng).trace;
      }
      c.secs.insert(c.secs.end(),
                    trace.seconds.begin() + static_cast<std::ptrdiff_t>(spec.timing_warmup),
                    trace.seconds.begin() + static_cast<std::ptrdiff_t>(needed));
    }
  }

  std::vector<TimingRow> out;
  for (const Cell& c : cells) {
    TimingRow row;
    row.scheme = to_string(c.scheme);
    row.layers = c.sc.layers;
    row.atoms = c.sc.atoms();
    row.samples = c.secs.size();
    double sum = 0.0;
    for (double x : c.secs) sum += x;
    row.mean_s = sum / static_cast<double>(c.secs.size());
    row.p50_s = quantile(c.secs, 0.5);
    row.p95_s = quantile(c.secs, 0.95);
    out.push_back(row);
  }
  return out;
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  std::vector<SummaryRow> out;
  std::map<std::tuple<std::string, std::string, double>, std::size_t> index;
  std::vector<std::vector<double>> samples;
  for (const auto& r : rows) {
    const auto key = std::tuple(r.experiment, r.scheme, r.sweep_value);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      out.push_back({r.experiment, r.scheme, r.sweep_value, 0, 0.0, 0.0, 0.0});
      samples.emplace_back();
    }
    samples[it->second].push_back(r.wssr);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& x = samples[i];
    const double n = static_cast<double>(x.size());
    double sum = 0.0;
    for (double v : x) sum += v;
    const double mean = sum / n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    out[i].n = x.size();
    out[i].mean = mean;
    out[i].sd = x.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    out[i].half_width = 1.96 * out[i].sd / std::sqrt(n);
  }
  return out;
}

}  // namespace simsec::bench
