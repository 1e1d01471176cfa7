#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "simsec/experiment.hpp"

namespace simsec::bench {

/// Provenance written as the first line of every output file.
struct Provenance {
  std::string build;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

enum class CsvKind { Results, Summary, Timing, Trace };

[[nodiscard]] std::string build_id();
[[nodiscard]] std::string to_string(CsvKind kind);

void write_results(std::ostream& out, const Provenance& prov, const std::vector<ResultRow>& rows);
void write_summary(std::ostream& out, const Provenance& prov, const std::vector<SummaryRow>& rows);
void write_timing(std::ostream& out, const Provenance& prov, const std::vector<TimingRow>& rows);
void write_traces(std::ostream& out, const Provenance& prov, const std::vector<TraceRow>& rows);

struct ResultsFile {
  Provenance provenance;
  std::vector<ResultRow> rows;
};

/// Throws ConfigError when the file does not follow the results schema.
[[nodiscard]] ResultsFile read_results(std::istream& in);
[[nodiscard]] ResultsFile read_results(const std::filesystem::path& path);

struct SummaryFile {
  Provenance provenance;
  std::vector<SummaryRow> rows;
};

[[nodiscard]] SummaryFile read_summary(std::istream& in);

struct SchemaReport {
  CsvKind kind = CsvKind::Results;
  std::size_t rows = 0;
  Provenance provenance;
};

/// Validates any file written by this library; throws ConfigError with the
/// offending line on failure.
[[nodiscard]] SchemaReport check_schema(std::istream& in);
[[nodiscard]] SchemaReport check_schema(const std::filesystem::path& path);

/// Whitespace-separated columns for gnuplot: one block per scheme, each line
/// "sweep_value mean half_width", blocks separated by two blank lines.
void write_plot_data(std::ostream& out, const std::vector<SummaryRow>& rows);

}  // namespace simsec::bench
