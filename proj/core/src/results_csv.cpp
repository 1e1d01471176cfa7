#include "simsec/results_csv.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "simsec/errors.hpp"

#ifndef SIMSEC_BUILD_ID
#define SIMSEC_BUILD_ID "unknown"
#endif

namespace simsec::bench {
namespace {

constexpr const char* kResultsHeader = "experiment,scheme,sweep_value,trial,wssr,iterations,rates,qos";
constexpr const char* kSummaryHeader = "experiment,scheme,sweep_value,n,mean,sd,ci95";
constexpr const char* kTimingHeader = "scheme,layers,atoms,samples,mean_s,p50_s,p95_s";
constexpr const char* kTraceHeader = "scheme,iteration,mean_wssr,mean_best";

const char* tag(CsvKind kind) {
  switch (kind) {
    case CsvKind::Results: return "simsec-results";
    case CsvKind::Summary: return "simsec-summary";
    case CsvKind::Timing: return "simsec-timing";
    case CsvKind::Trace: return "simsec-trace";
  }
  return "";
}

const char* columns(CsvKind kind) {
  switch (kind) {
    case CsvKind::Results: return kResultsHeader;
    case CsvKind::Summary: return kSummaryHeader;
    case CsvKind::Timing: return kTimingHeader;
    case CsvKind::Trace: return kTraceHeader;
  }
  return "";
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_header(std::ostream& out, CsvKind kind, const Provenance& p) {
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(p.config_hash));
  out << "# " << tag(kind) << " v1 build=" << p.build << " config=" << hash << " seed=" << p.seed
      << '\n'
      << columns(kind) << '\n';
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

class LineError {
 public:
  explicit LineError(std::size_t line) : line_(line) {}
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("line " + std::to_string(line_) + ": " + what);
  }

 private:
  std::size_t line_;
};

double parse_double(const std::string& s, const LineError& at) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') at.fail("bad number '" + s + "'");
  return v;
}

std::size_t parse_count(const std::string& s, const LineError& at) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    at.fail("bad count '" + s + "'");
  }
  return static_cast<std::size_t>(std::strtoull(s.c_str(), nullptr, 10));
}

/// Parses "# <tag> v1 build=X config=H seed=S" and the column line.
std::pair<CsvKind, Provenance> read_header(std::istream& in, std::size_t& line_no) {
  std::string first;
  if (!std::getline(in, first)) throw ConfigError("empty file");
  line_no = 1;
  LineError at(1);
  std::istringstream ss(first);
  std::string hash_mark, name, version, build, config, seed;
  ss >> hash_mark >> name >> version >> build >> config >> seed;
  if (hash_mark != "#") at.fail("missing provenance comment");
  CsvKind kind{};
  bool found = false;
  for (CsvKind k : {CsvKind::Results, CsvKind::Summary, CsvKind::Timing, CsvKind::Trace}) {
    if (name == tag(k)) {
      kind = k;
      found = true;
    }
  }
  if (!found) at.fail("unknown file kind '" + name + "'");
  if (version != "v1") at.fail("unsupported schema version '" + version + "'");
  auto value = [&](const std::string& field, const char* key) {
    const std::string prefix = std::string(key) + "=";
    if (field.rfind(prefix, 0) != 0) at.fail(std::string("missing ") + key + "=");
    return field.substr(prefix.size());
  };
  Provenance p;
  p.build = value(build, "build");
  const std::string h = value(config, "config");
  if (h.size() != 16 || h.find_first_not_of("0123456789abcdef") != std::string::npos) {
    at.fail("config hash must be 16 hex digits");
  }
  p.config_hash = std::strtoull(h.c_str(), nullptr, 16);
  p.seed = parse_count(value(seed, "seed"), at);
  std::string rest;
  if (ss >> rest) at.fail("trailing data in provenance line");

  std::string cols;
  if (!std::getline(in, cols)) throw ConfigError("line 2: missing column header");
  line_no = 2;
  if (cols != columns(kind)) {
    throw ConfigError("line 2: column header does not match the " + std::string(tag(kind)) +
                      " v1 schema");
  }
  return {kind, p};
}

ResultRow parse_result(const std::string& line, const LineError& at) {
  const auto f = split(line, ',');
  if (f.size() != 8) at.fail("expected 8 fields, found " + std::to_string(f.size()));
  ResultRow r;
  r.experiment = f[0];
  r.scheme = f[1];
  try {
    (void)parse_kind(r.experiment);
    (void)parse_scheme(r.scheme);
  } catch (const ConfigError& e) {
    at.fail(e.what());
  }
  r.sweep_value = parse_double(f[2], at);
  r.trial = parse_count(f[3], at);
  r.wssr = parse_double(f[4], at);
  if (!(r.wssr >= 0.0)) at.fail("negative WSSR");
  r.iterations = parse_count(f[5], at);
  if (!f[6].empty()) {
    for (const auto& s : split(f[6], ';')) {
      const double v = parse_double(s, at);
      if (!(v >= 0.0)) at.fail("negative rate");
      r.rates.push_back(v);
    }
  }
  if (!f[7].empty()) {
    for (const auto& s : split(f[7], ';')) {
      if (s != "0" && s != "1") at.fail("QoS flags must be 0 or 1");
      r.qos.push_back(s == "1");
    }
    if (r.qos.size() != r.rates.size()) at.fail("QoS flag count differs from rate count");
  }
  return r;
}

void check_line(CsvKind kind, const std::string& line, const LineError& at) {
  switch (kind) {
    case CsvKind::Results:
      (void)parse_result(line, at);
      return;
    case CsvKind::Summary: {
      const auto f = split(line, ',');
      if (f.size() != 7) at.fail("expected 7 fields");
      (void)parse_double(f[2], at);
      if (parse_count(f[3], at) == 0) at.fail("n must be >= 1");
      if (!(parse_double(f[4], at) >= 0.0)) at.fail("negative mean WSSR");
      if (!(parse_double(f[5], at) >= 0.0) || !(parse_double(f[6], at) >= 0.0)) {
        at.fail("negative spread");
      }
      return;
    }
    case CsvKind::Timing: {
      const auto f = split(line, ',');
      if (f.size() != 7) at.fail("expected 7 fields");
      for (int i = 1; i <= 3; ++i) (void)parse_count(f[static_cast<std::size_t>(i)], at);
      for (int i = 4; i <= 6; ++i) {
        if (!(parse_double(f[static_cast<std::size_t>(i)], at) > 0.0)) at.fail("seconds must be > 0");
      }
      return;
    }
    case CsvKind::Trace: {
      const auto f = split(line, ',');
      if (f.size() != 4) at.fail("expected 4 fields");
      (void)parse_count(f[1], at);
      (void)parse_double(f[2], at);
      (void)parse_double(f[3], at);
      return;
    }
  }
}

}  // namespace

std::string build_id() { return SIMSEC_BUILD_ID; }

std::string to_string(CsvKind kind) { return tag(kind); }

void write_results(std::ostream& out, const Provenance& prov, const std::vector<ResultRow>& rows) {
  write_header(out, CsvKind::Results, prov);
  for (const auto& r : rows) {
    out << r.experiment << ',' << r.scheme << ',' << num(r.sweep_value) << ',' << r.trial << ','
        << num(r.wssr) << ',' << r.iterations << ',';
    for (std::size_t i = 0; i < r.rates.size(); ++i) out << (i ? ";" : "") << num(r.rates[i]);
    out << ',';
    for (std::size_t i = 0; i < r.qos.size(); ++i) out << (i ? ";" : "") << (r.qos[i] ? '1' : '0');
    out << '\n';
  }
}

void write_summary(std::ostream& out, const Provenance& prov, const std::vector<SummaryRow>& rows) {
  write_header(out, CsvKind::Summary, prov);
  for (const auto& r : rows) {
    out << r.experiment << ',' << r.scheme << ',' << num(r.sweep_value) << ',' << r.n << ','
        << num(r.mean) << ',' << num(r.sd) << ',' << num(r.half_width) << '\n';
  }
}

void write_timing(std::ostream& out, const Provenance& prov, const std::vector<TimingRow>& rows) {
  write_header(out, CsvKind::Timing, prov);
  for (const auto& r : rows) {
    out << r.scheme << ',' << r.layers << ',' << r.atoms << ',' << r.samples << ','
        << num(r.mean_s) << ',' << num(r.p50_s) << ',' << num(r.p95_s) << '\n';
  }
}

void write_traces(std::ostream& out, const Provenance& prov, const std::vector<TraceRow>& rows) {
  write_header(out, CsvKind::Trace, prov);
  for (const auto& r : rows) {
    out << r.scheme << ',' << r.iteration << ',' << num(r.mean_wssr) << ',' << num(r.mean_best)
        << '\n';
  }
}

ResultsFile read_results(std::istream& in) {
  std::size_t line_no = 0;
  auto [kind, prov] = read_header(in, line_no);
  if (kind != CsvKind::Results) throw ConfigError("not a results file: " + std::string(tag(kind)));
  ResultsFile file;
  file.provenance = prov;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    file.rows.push_back(parse_result(line, LineError(line_no)));
  }
  return file;
}

ResultsFile read_results(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return read_results(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

SummaryFile read_summary(std::istream& in) {
  std::size_t line_no = 0;
  auto [kind, prov] = read_header(in, line_no);
  if (kind != CsvKind::Summary) throw ConfigError("not a summary file: " + std::string(tag(kind)));
  SummaryFile file;
  file.provenance = prov;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const LineError at(line_no);
    check_line(kind, line, at);
    const auto f = split(line, ',');
    file.rows.push_back({f[0], f[1], parse_double(f[2], at), parse_count(f[3], at),
                         parse_double(f[4], at), parse_double(f[5], at), parse_double(f[6], at)});
  }
  return file;
}

SchemaReport check_schema(std::istream& in) {
  std::size_t line_no = 0;
  auto [kind, prov] = read_header(in, line_no);
  SchemaReport rep;
  rep.kind = kind;
  rep.provenance = prov;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    check_line(kind, line, LineError(line_no));
    ++rep.rows;
  }
  return rep;
}

SchemaReport check_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return check_schema(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_plot_data(std::ostream& out, const std::vector<SummaryRow>& rows) {
  std::vector<std::string> order;
  for (const auto& r : rows) {
    const std::string key = r.experiment + " " + r.scheme;
    if (std::find(order.begin(), order.end(), key) == order.end()) order.push_back(key);
  }
  bool first = true;
  for (const auto& key : order) {
    if (!first) out << "\n\n";
    first = false;
    out << "# " << key << "\n# sweep_value mean ci95\n";
    for (const auto& r : rows) {
      if (r.experiment + " " + r.scheme != key) continue;
      out << num(r.sweep_value) << ' ' << num(r.mean) << ' ' << num(r.half_width) << '\n';
    }
  }
}

}  // namespace simsec::bench
