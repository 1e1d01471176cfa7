#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "simsec/config.hpp"
#include "simsec/mhacl.hpp"
#include "simsec/secrecy.hpp"
#include "simsec/simhacl.hpp"

namespace simsec::bench {

enum class ExperimentKind { Convergence, Layers, Atoms, Bits, Users, Power, Timing };
enum class Scheme { Simhacl, Mhacl, MhaclB1, MhaclB2, MhaclB4, PowerOnly, RandomAll };
enum class PowerOnlyPhases { Torus, Codebook };

[[nodiscard]] std::string to_string(ExperimentKind kind);
[[nodiscard]] std::string to_string(Scheme scheme);
/// Throw ConfigError on unknown names.
[[nodiscard]] ExperimentKind parse_kind(const std::string& name);
[[nodiscard]] Scheme parse_scheme(const std::string& name);
/// Comma-separated scheme list.
[[nodiscard]] std::vector<Scheme> parse_schemes(const std::string& list);

/// Sweep values per kind: layers → M, atoms → N (a perfect square), bits → b
/// with 0 meaning continuous, users → K = L, power → P_A in dBm, timing → M.
[[nodiscard]] std::vector<double> default_sweep(ExperimentKind kind);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::Layers;
  std::vector<double> sweep;  // empty: default_sweep(kind)
  std::size_t trials = 100;
  std::vector<Scheme> schemes{Scheme::Simhacl, Scheme::PowerOnly};
  std::uint64_t seed = 1;
  std::filesystem::path out = "results";
  PowerOnlyPhases power_only_phases = PowerOnlyPhases::Torus;
  std::size_t timing_iterations = 500;
  std::size_t timing_warmup = 10;

  [[nodiscard]] std::vector<double> sweep_values() const;
  void validate() const;
};

/// Everything a run needs, parsed from one YAML document.
struct RunConfig {
  SystemConfig scenario;
  manifold::SimhaclOptions optimizer;
  manifold::CodebookMode codebook_mode = manifold::CodebookMode::FullCircle;
  mhacl::MetaConfig meta;
  ExperimentSpec experiment;
  std::string source;  // raw text the config was parsed from

  /// FNV-1a over the source text and any command-line overrides.
  [[nodiscard]] std::uint64_t hash() const;
  std::string overrides;

  void validate() const;
};

[[nodiscard]] RunConfig run_config_from_string(const std::string& yaml_text);
[[nodiscard]] RunConfig load_run_config(const std::filesystem::path& path);

/// 64-bit FNV-1a.
[[nodiscard]] std::uint64_t fnv1a(const std::string& text) noexcept;

struct ResultRow {
  std::string experiment;
  std::string scheme;
  double sweep_value = 0.0;
  std::size_t trial = 0;
  double wssr = 0.0;
  std::size_t iterations = 0;
  std::vector<double> rates;
  std::vector<bool> qos;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

struct TimingRow {
  std::string scheme;
  std::size_t layers = 0;
  std::size_t atoms = 0;
  std::size_t samples = 0;
  double mean_s = 0.0;
  double p50_s = 0.0;
  double p95_s = 0.0;
};

struct SummaryRow {
  std::string experiment;
  std::string scheme;
  double sweep_value = 0.0;
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double half_width = 0.0;  // 1.96·sd/√n

  friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

/// Per-iteration averages of the optimizer traces (convergence experiment).
struct TraceRow {
  std::string scheme;
  std::size_t iteration = 0;
  double mean_wssr = 0.0;
  double mean_best = 0.0;
};

/// The scenario for one sweep cell.
[[nodiscard]] SystemConfig apply_sweep(const SystemConfig& base, ExperimentKind kind,
                                       double value);

/// Outcome of one scheme on one task.
struct SchemeOutcome {
  secrecy::SecrecyReport report;
  std::size_t iterations = 0;
  manifold::OptimizerTrace trace;
};

/// Runs one scheme on one task. `rng` seeds restarts, SPSA and frozen phases.
[[nodiscard]] SchemeOutcome run_scheme(const RunConfig& cfg, const SystemConfig& scenario,
                                       const secrecy::Task& task, Scheme scheme,
                                       const em::PhaseTensor& init, SeededRng& rng);

/// Non-optimizing baselines and quantized MHACL, for one task.
[[nodiscard]] secrecy::SecrecyReport run_baselines(const RunConfig& cfg,
                                                   const SystemConfig& scenario,
                                                   const secrecy::Task& task, Scheme scheme,
                                                   SeededRng& rng);

struct ExperimentOutput {
  std::vector<ResultRow> rows;     // canonical order: sweep value, scheme, trial
  std::vector<TraceRow> traces;    // convergence experiments only
};

/// Worker count: SIMSEC_WORKERS if set (≥ 1), else hardware concurrency.
[[nodiscard]] std::size_t default_workers();

[[nodiscard]] ExperimentOutput run_experiment(const RunConfig& cfg, std::size_t workers);
[[nodiscard]] std::vector<TimingRow> run_timing(const RunConfig& cfg);
[[nodiscard]] std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);

/// Quantile by linear interpolation between order statistics.
[[nodiscard]] double quantile(std::vector<double> values, double q);

}  // namespace simsec::bench
