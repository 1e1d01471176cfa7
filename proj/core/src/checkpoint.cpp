#include "simsec/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "simsec/errors.hpp"

namespace simsec::mhacl {
namespace {

constexpr const char* kMagic = "simsec-checkpoint";

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void scalar(const char* key, double v) { out_ << key << ' ' << hex(v) << '\n'; }
  void count(const char* key, std::size_t v) { out_ << key << ' ' << v << '\n'; }
  void vec(const char* key, const std::vector<double>& v) {
    out_ << key << ' ' << v.size();
    for (double x : v) out_ << ' ' << hex(x);
    out_ << '\n';
  }
  void adam(const char* key, const manifold::RAdamState& s) {
    out_ << key << ' ' << s.t << ' ' << hex(s.alpha) << ' ' << hex(s.beta1) << ' '
         << hex(s.beta2) << ' ' << hex(s.eps) << '\n';
    vec("m", s.m);
    vec("v", s.v);
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::istringstream line(const char* key) {
    std::string text;
    while (std::getline(in_, text)) {
      ++line_no_;
      if (!text.empty()) break;
    }
    std::istringstream ls(text);
    std::string got;
    ls >> got;
    if (got != key) fail(std::string("expected '") + key + "', found '" + got + "'");
    return ls;
  }

  double number(std::istringstream& ls) {
    std::string tok;
    if (!(ls >> tok)) fail("missing value");
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') fail("bad number '" + tok + "'");
    return v;
  }

  std::size_t integer(std::istringstream& ls) {
    long long v = 0;
    if (!(ls >> v) || v < 0) fail("bad count");
    return static_cast<std::size_t>(v);
  }

  void done(std::istringstream& ls) {
    std::string extra;
    if (ls >> extra) fail("trailing data '" + extra + "'");
  }

  double scalar(const char* key) {
    auto ls = line(key);
    const double v = number(ls);
    done(ls);
    return v;
  }
  std::size_t count(const char* key) {
    auto ls = line(key);
    const std::size_t v = integer(ls);
    done(ls);
    return v;
  }
  std::vector<double> vec(const char* key) {
    auto ls = line(key);
    const std::size_t n = integer(ls);
    std::vector<double> v(n);
    for (double& x : v) x = number(ls);
    done(ls);
    return v;
  }
  manifold::RAdamState adam(const char* key) {
    manifold::RAdamState s;
    auto ls = line(key);
    s.t = integer(ls);
    s.alpha = number(ls);
    s.beta1 = number(ls);
    s.beta2 = number(ls);
    s.eps = number(ls);
    done(ls);
    s.m = vec("m");
    s.v = vec("v");
    if (s.m.size() != s.v.size()) fail("Adam moment sizes differ");
    return s;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("checkpoint line " + std::to_string(line_no_) + ": " + what);
  }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

}  // namespace

void save_checkpoint(std::ostream& out, const ContinualState& s) {
  s.validate();
  Writer w(out);
  out << kMagic << ' ' << kCheckpointVersion << '\n';
  const PolicyParams& p = s.params;
  out << "shape " << p.users << ' ' << p.layers << ' ' << p.grid_rows << ' ' << p.grid_cols << '\n';
  w.vec("power_gain", p.power_gain);
  w.vec("power_bias", p.power_bias);
  w.vec("phase_gain", p.phase_gain);
  w.vec("phase_bias", p.phase_bias);
  w.scalar("lambda_scale", p.lambda_scale);
  w.vec("mask_power", p.mask_power);
  w.vec("mask_phase", p.mask_phase);
  w.vec("interference", p.interference);
  w.scalar("lambda_reg", s.lambda_reg);
  w.scalar("beta_traj", s.beta_traj);
  w.scalar("snapshot_decay", s.snapshot_decay);
  w.count("snapshots", s.snapshots.size());
  for (const auto& snap : s.snapshots) w.vec("theta", snap);
  w.count("trajectory_count", s.trajectory.count);
  w.vec("trajectory_mean", s.trajectory.mean);
  w.vec("trajectory_m2", s.trajectory.m2);
  out << "buffer " << s.buffer.capacity() << ' ' << hex(s.buffer.temperature()) << ' '
      << s.buffer.next_sequence() << ' ' << s.buffer.size() << '\n';
  for (const auto& e : s.buffer.entries()) {
    out << "entry " << e.task << ' ' << e.channel_ref << ' ' << e.sequence << ' ' << hex(e.wssr)
        << ' ' << hex(e.priority) << '\n';
    w.vec("grad_power", e.grad_power);
    w.vec("grad_phase", e.grad_phase);
  }
  w.adam("meta_power", s.meta_power);
  w.adam("meta_phase", s.meta_phase);
  w.vec("ema_power", s.ema_power);
  w.vec("ema_phase", s.ema_phase);
  w.vec("ema_interference", s.ema_interference);
  if (s.last_phases) {
    out << "last_phases " << s.last_phases->layers() << ' ' << s.last_phases->atoms() << '\n';
    w.vec("values", {s.last_phases->values().begin(), s.last_phases->values().end()});
  } else {
    out << "last_phases 0 0\n";
  }
  w.count("tasks_seen", s.tasks_seen);
  out << "end\n";
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

ContinualState load_checkpoint(std::istream& in) {
  Reader r(in);
  {
    auto ls = r.line(kMagic);
    const std::size_t version = r.integer(ls);
    r.done(ls);
    if (version != static_cast<std::size_t>(kCheckpointVersion)) {
      r.fail("unsupported checkpoint version " + std::to_string(version));
    }
  }
  ContinualState s;
  PolicyParams& p = s.params;
  {
    auto ls = r.line("shape");
    p.users = r.integer(ls);
    p.layers = r.integer(ls);
    p.grid_rows = r.integer(ls);
    p.grid_cols = r.integer(ls);
    r.done(ls);
  }
  p.power_gain = r.vec("power_gain");
  p.power_bias = r.vec("power_bias");
  p.phase_gain = r.vec("phase_gain");
  p.phase_bias = r.vec("phase_bias");
  p.lambda_scale = r.scalar("lambda_scale");
  p.mask_power = r.vec("mask_power");
  p.mask_phase = r.vec("mask_phase");
  p.interference = r.vec("interference");
  s.lambda_reg = r.scalar("lambda_reg");
  s.beta_traj = r.scalar("beta_traj");
  s.snapshot_decay = r.scalar("snapshot_decay");
  const std::size_t n_snap = r.count("snapshots");
  for (std::size_t i = 0; i < n_snap; ++i) s.snapshots.push_back(r.vec("theta"));
  s.trajectory.count = r.count("trajectory_count");
  s.trajectory.mean = r.vec("trajectory_mean");
  s.trajectory.m2 = r.vec("trajectory_m2");
  {
    auto ls = r.line("buffer");
    const std::size_t capacity = r.integer(ls);
    const double temperature = r.number(ls);
    const std::size_t next_seq = r.integer(ls);
    const std::size_t n = r.integer(ls);
    r.done(ls);
    std::vector<BufferEntry> entries(n);
    for (auto& e : entries) {
      auto es = r.line("entry");
      e.task = r.integer(es);
      e.channel_ref = r.integer(es);
      e.sequence = r.integer(es);
      e.wssr = r.number(es);
      e.priority = r.number(es);
      r.done(es);
      e.grad_power = r.vec("grad_power");
      e.grad_phase = r.vec("grad_phase");
    }
    s.buffer = ExperienceBuffer(capacity, temperature);
    s.buffer.restore(std::move(entries), next_seq);
  }
  s.meta_power = r.adam("meta_power");
  s.meta_phase = r.adam("meta_phase");
  s.ema_power = r.vec("ema_power");
  s.ema_phase = r.vec("ema_phase");
  s.ema_interference = r.vec("ema_interference");
  {
    auto ls = r.line("last_phases");
    const std::size_t layers = r.integer(ls);
    const std::size_t atoms = r.integer(ls);
    r.done(ls);
    if (layers > 0) {
      std::vector<double> v = r.vec("values");
      if (v.size() != layers * atoms) r.fail("phase tensor size mismatch");
      s.last_phases = em::PhaseTensor(layers, atoms, std::move(v));
    }
  }
  s.tasks_seen = r.count("tasks_seen");
  (void)r.line("end");
  try {
    s.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("checkpoint: invalid state: ") + e.what());
  }
  return s;
}

void save_checkpoint(const std::filesystem::path& path, const ContinualState& state) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  save_checkpoint(out, state);
}

ContinualState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

}  // namespace simsec::mhacl
