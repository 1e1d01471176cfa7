// simsec: Monte-Carlo sweeps, timing runs and CSV utilities.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "simsec/errors.hpp"
#include "simsec/experiment.hpp"
#include "simsec/results_csv.hpp"

namespace fs = std::filesystem;
using namespace simsec;
using namespace simsec::bench;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct RunFlags {
  std::string config;
  std::optional<std::string> experiment;
  std::optional<std::string> schemes;
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "YAML config file")->required();
  cmd->add_option("--experiment", f.experiment,
                  "convergence|layers|atoms|bits|users|power|timing");
  cmd->add_option("--schemes", f.schemes,
                  "comma-separated: simhacl,mhacl,mhacl-b1,mhacl-b2,mhacl-b4,power-only,random-all");
  cmd->add_option("--trials", f.trials, "Monte-Carlo trials per cell");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--out", f.out, "output directory");
}

RunConfig resolve(const RunFlags& f) {
  RunConfig cfg = load_run_config(f.config);
  std::string ov;
  if (f.experiment) {
    const auto kind = parse_kind(*f.experiment);
    // A different kind makes the configured sweep meaningless.
    if (kind != cfg.experiment.kind) cfg.experiment.sweep.clear();
    cfg.experiment.kind = kind;
    ov += " experiment=" + *f.experiment;
  }
  if (f.schemes) {
    cfg.experiment.schemes = parse_schemes(*f.schemes);
    ov += " schemes=" + *f.schemes;
  }
  if (f.trials) {
    cfg.experiment.trials = *f.trials;
    ov += " trials=" + std::to_string(*f.trials);
  }
  if (f.seed) {
    cfg.experiment.seed = *f.seed;
    ov += " seed=" + std::to_string(*f.seed);
  }
  if (f.out) cfg.experiment.out = *f.out;  // output location does not affect results
  cfg.overrides = ov;
  cfg.validate();
  return cfg;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
}

Provenance provenance(const RunConfig& cfg) {
  return {build_id(), cfg.hash(), cfg.experiment.seed};
}

int cmd_timing(const RunConfig& cfg) {
  ensure_dir(cfg.experiment.out);
  const auto rows = run_timing(cfg);
  const fs::path path = cfg.experiment.out / "timing.csv";
  auto out = open_out(path);
  write_timing(out, provenance(cfg), rows);
  for (const auto& r : rows) {
    std::printf("%-8s M=%zu N=%zu p50=%.3f ms p95=%.3f ms\n", r.scheme.c_str(), r.layers, r.atoms,
                r.p50_s * 1e3, r.p95_s * 1e3);
  }
  std::cout << "wrote " << path.string() << '\n';
  return 0;
}

int cmd_run(const RunConfig& cfg) {
  if (cfg.experiment.kind == ExperimentKind::Timing) return cmd_timing(cfg);
  ensure_dir(cfg.experiment.out);
  const std::string kind = to_string(cfg.experiment.kind);
  const ExperimentOutput res = run_experiment(cfg, default_workers());
  const Provenance prov = provenance(cfg);
  const fs::path results = cfg.experiment.out / (kind + "_results.csv");
  const fs::path summary = cfg.experiment.out / (kind + "_summary.csv");
  {
    auto out = open_out(results);
    write_results(out, prov, res.rows);
  }
  {
    auto out = open_out(summary);
    write_summary(out, prov, summarize(res.rows));
  }
  if (!res.traces.empty()) {
    auto out = open_out(cfg.experiment.out / (kind + "_trace.csv"));
    write_traces(out, prov, res.traces);
  }
  std::cout << "wrote " << res.rows.size() << " rows to " << results.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Secrecy-rate optimization for stacked intelligent metasurfaces"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "run a Monte-Carlo sweep");
  add_run_flags(run, run_flags);

  RunFlags timing_flags;
  auto* timing = app.add_subcommand("timing", "measure per-iteration wall time");
  add_run_flags(timing, timing_flags);

  std::string sum_in;
  std::string sum_out;
  auto* summarize_cmd = app.add_subcommand("summarize", "regenerate a summary from a results file");
  summarize_cmd->add_option("results", sum_in, "results CSV")->required();
  summarize_cmd->add_option("--out", sum_out, "output file (default: stdout)");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate-config", "parse and check a config file");
  validate->add_option("--config", validate_path, "YAML config file")->required();

  std::vector<std::string> schema_files;
  auto* schema = app.add_subcommand("check-schema", "validate output CSV files");
  schema->add_option("files", schema_files, "CSV files")->required();

  std::string plot_in;
  auto* plot = app.add_subcommand("plot-data", "gnuplot columns from a results or summary file");
  plot->add_option("file", plot_in, "results or summary CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(resolve(run_flags));
    if (*timing) {
      RunConfig cfg = resolve(timing_flags);
      cfg.experiment.kind = ExperimentKind::Timing;
      if (!timing_flags.experiment) cfg.experiment.sweep.clear();
      cfg.validate();
      return cmd_timing(cfg);
    }
    if (*summarize_cmd) {
      const ResultsFile file = read_results(fs::path(sum_in));
      const auto rows = summarize(file.rows);
      if (sum_out.empty()) {
        write_summary(std::cout, file.provenance, rows);
      } else {
        auto out = open_out(sum_out);
        write_summary(out, file.provenance, rows);
      }
      return 0;
    }
    if (*validate) {
      const RunConfig cfg = load_run_config(validate_path);
      std::cout << "ok: " << to_string(cfg.experiment.kind) << " experiment, "
                << cfg.experiment.trials << " trials, config hash " << std::hex << cfg.hash()
                << '\n';
      return 0;
    }
    if (*schema) {
      for (const auto& f : schema_files) {
        const SchemaReport rep = check_schema(fs::path(f));
        std::cout << f << ": " << to_string(rep.kind) << " v1, " << rep.rows << " rows\n";
      }
      return 0;
    }
    if (*plot) {
      std::ifstream in(plot_in);
      if (!in) throw ConfigError("cannot open " + plot_in);
      const SchemaReport rep = check_schema(in);
      std::vector<SummaryRow> rows;
      if (rep.kind == CsvKind::Results) {
        rows = summarize(read_results(fs::path(plot_in)).rows);
      } else if (rep.kind == CsvKind::Summary) {
        std::ifstream again(plot_in);
        rows = read_summary(again).rows;
      } else {
        throw ConfigError("plot-data needs a results or summary file");
      }
      write_plot_data(std::cout, rows);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
