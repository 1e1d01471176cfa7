#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "simsec/manifold.hpp"
#include "simsec/rng.hpp"
#include "simsec/simhacl.hpp"

namespace simsec::mhacl {

using manifold::Objective;
using manifold::OptimizerTrace;
using manifold::ProductManifoldPoint;

/// Separable orthonormal 2-D DCT-II over a rows×cols grid of meta-atoms.
class DctBasis {
 public:
  DctBasis() = default;
  DctBasis(std::size_t rows, std::size_t cols);

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] std::size_t size() const noexcept { return rows_ * cols_; }

  void forward(std::span<const double> x, std::span<double> out) const;
  void inverse(std::span<const double> x, std::span<double> out) const;

 private:
  // out = A x Bᵀ where A is r×r and B is c×c (row-major).
  void apply(std::span<const double> x, std::span<double> out, bool transpose) const;

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> row_basis_;
  std::vector<double> col_basis_;
};

/// Update policies plus the masks and interference map they read.
struct PolicyParams {
  std::size_t users = 0;
  std::size_t layers = 0;
  std::size_t grid_rows = 0;
  std::size_t grid_cols = 0;

  std::vector<double> power_gain;  // K
  std::vector<double> power_bias;  // K
  std::vector<double> phase_gain;  // M×N, per transform mode
  std::vector<double> phase_bias;  // M×N
  double lambda_scale = 0.1;

  std::vector<double> mask_power;    // K, in [0,1]
  std::vector<double> mask_phase;    // M×N, in [0,1]
  std::vector<double> interference;  // M×N, ≥ 0

  /// Gains 1, biases 0, masks 1, interference 0.
  static PolicyParams identity(std::size_t users, std::size_t layers, std::size_t grid_rows,
                               std::size_t grid_cols, double lambda_scale);

  [[nodiscard]] std::size_t atoms() const noexcept { return grid_rows * grid_cols; }
  void validate() const;

  /// θ_p = (gain, bias), 2K values.
  [[nodiscard]] std::vector<double> theta_power() const;
  /// θ_Φ = (gain, bias, log λ_scale), 2MN + 1 values.
  [[nodiscard]] std::vector<double> theta_phase() const;
  void set_theta_power(std::span<const double> theta);
  void set_theta_phase(std::span<const double> theta);
  [[nodiscard]] std::vector<double> theta() const;

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

/// ã = a + rate·(gain⊙(g_a⊙M_p) + bias), then projected onto the power sphere.
[[nodiscard]] std::vector<double> pan_update(std::span<const double> a,
                                             std::span<const double> g_a,
                                             const PolicyParams& params, double budget,
                                             double rate);

/// T(x) = Dᵀ(gain⊙(D x) + bias) per layer.
[[nodiscard]] std::vector<double> spectral_transform(std::span<const double> x,
                                                     const PolicyParams& params,
                                                     const DctBasis& basis);

/// Δφ = λ_scale·(σ(κ·T(g⊙M_Φ⊙C_norm)) − 1/2), retracted onto the torus. The
/// applied step is written to `delta` when non-null.
[[nodiscard]] em::PhaseTensor psn_update(const em::PhaseTensor& phases,
                                         std::span<const double> g_phase,
                                         const PolicyParams& params, const DctBasis& basis,
                                         double kappa, std::vector<double>* delta = nullptr);

/// C / mean(C); all ones when C is identically zero.
[[nodiscard]] std::vector<double> normalized_interference(std::span<const double> c);

struct MetaConfig {
  std::size_t epochs = 40;       // N_e
  std::size_t outer = 5;         // N_o
  std::size_t inner = 10;        // N_i
  std::size_t psn_period = 4;    // N
  double alpha_power = 1e-2;     // α_p
  double alpha_phase = 1e-2;     // α_Φ
  std::size_t spsa_samples = 8;
  double spsa_scale = 0.05;      // relative perturbation

  double pan_rate = 0.02;        // PAN base rate, in units of P_A
  double psn_scale = 0.1;        // initial λ_scale
  double psn_kappa = 1.0;

  double lambda_reg = 1e-2;
  double beta_traj = 1e-4;
  double snapshot_decay = 0.8;
  double mask_decay = 0.9;
  double interference_decay = 0.9;

  std::size_t buffer_capacity = 32;
  double buffer_temperature = 1.0;
  std::size_t buffer_batch = 4;

  void validate() const;
  [[nodiscard]] bool meta_enabled() const noexcept { return alpha_power > 0.0 || alpha_phase > 0.0; }
};

struct BufferEntry {
  std::size_t task = 0;
  std::size_t channel_ref = 0;     // caller-defined handle to the channel snapshot
  std::vector<double> grad_power;
  std::vector<double> grad_phase;
  double wssr = 0.0;
  double priority = 0.0;
  std::size_t sequence = 0;        // insertion order, assigned by the buffer

  friend bool operator==(const BufferEntry&, const BufferEntry&) = default;
};

class ExperienceBuffer {
 public:
  ExperienceBuffer() = default;
  ExperienceBuffer(std::size_t capacity, double temperature);

  [[nodiscard]] std::size_t capacity() const noexcept { return capacity_; }
  [[nodiscard]] double temperature() const noexcept { return temperature_; }
  [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
  [[nodiscard]] bool empty() const noexcept { return entries_.empty(); }
  [[nodiscard]] const std::vector<BufferEntry>& entries() const noexcept { return entries_; }

  /// Inserts with the entry's own priority, then evicts the lowest priority
  /// entries until the capacity holds.
  void insert(BufferEntry entry);
  /// Inserts, recomputes every priority as |best − wssr| + 0.1/recency rank,
  /// then evicts.
  void add(BufferEntry entry, double best_wssr);
  void reprioritize(double best_wssr);

  /// Sampling probabilities ∝ priority^temperature (uniform if all are zero).
  [[nodiscard]] std::vector<double> probabilities() const;
  /// Throws std::logic_error on an empty buffer.
  [[nodiscard]] std::size_t sample(SeededRng& rng) const;
  [[nodiscard]] std::vector<std::size_t> sample_batch(std::size_t n, SeededRng& rng) const;

  /// Restores a buffer verbatim (checkpoint loading).
  void restore(std::vector<BufferEntry> entries, std::size_t next_sequence);
  [[nodiscard]] std::size_t next_sequence() const noexcept { return next_sequence_; }

  friend bool operator==(const ExperienceBuffer&, const ExperienceBuffer&) = default;

 private:
  void evict();

  std::size_t capacity_ = 0;
  double temperature_ = 1.0;
  std::vector<BufferEntry> entries_;
  std::size_t next_sequence_ = 0;
};

/// Running diagonal moments of past per-layer mean |Δφ|.
struct TrajectoryStats {
  std::size_t count = 0;
  std::vector<double> mean;
  std::vector<double> m2;  // Σ (x − mean)²

  void update(std::span<const double> x);
  [[nodiscard]] std::vector<double> variance(double floor = 1e-8) const;
  /// Negative log-likelihood under N(mean, diag(variance)); 0 with no history.
  [[nodiscard]] double nll(std::span<const double> x) const;

  friend bool operator==(const TrajectoryStats&, const TrajectoryStats&) = default;
};

struct ContinualState {
  PolicyParams params;
  std::vector<std::vector<double>> snapshots;  // θ after each finished task
  double lambda_reg = 0.0;
  double beta_traj = 0.0;
  double snapshot_decay = 0.8;
  TrajectoryStats trajectory;
  ExperienceBuffer buffer;

  manifold::RAdamState meta_power;
  manifold::RAdamState meta_phase;
  std::vector<double> ema_power;         // EMA of |g_a|
  std::vector<double> ema_phase;         // EMA of |g_φ|
  std::vector<double> ema_interference;  // EMA of |g_φ|, current tasks only
  std::optional<em::PhaseTensor> last_phases;
  std::size_t tasks_seen = 0;

  /// Fresh state with identity policies.
  static ContinualState initial(std::size_t users, std::size_t layers, std::size_t grid_rows,
                                std::size_t grid_cols, const MetaConfig& cfg);

  /// ω_k = decay^{t−1−k}, normalized to sum 1 (empty without snapshots).
  [[nodiscard]] std::vector<double> snapshot_weights() const;
  void validate() const;

  friend bool operator==(const ContinualState&, const ContinualState&) = default;
};

/// −WSSR* + λ_reg Σ ω_k ‖θ − θ_k‖² + β_traj·L_traj(step).
[[nodiscard]] double continual_loss(double wssr, std::span<const double> theta,
                                    const ContinualState& state,
                                    std::span<const double> layer_step);

struct InnerResult {
  ProductManifoldPoint best;
  double best_value = 0.0;
  ProductManifoldPoint last;
  std::vector<double> layer_step;  // per-layer mean |Δφ| over the loop
  OptimizerTrace trace;
};

/// N_i rounds of psn_update followed by pan_update on one task.
InnerResult inner_loop(Objective& objective, const ProductManifoldPoint& start,
                       const PolicyParams& params, const DctBasis& basis, const MetaConfig& cfg,
                       std::size_t steps);

/// Two-sided SPSA with Rademacher directions and c_i = scale·max(|θ_i|, 1).
[[nodiscard]] std::vector<double> spsa_gradient(
    const std::function<double(std::span<const double>)>& loss, std::span<const double> theta,
    std::size_t samples, double scale, SeededRng& rng);

/// One meta update on `params` for the given epoch: θ_p always, θ_Φ only when
/// epoch % psn_period == 0. `loss` maps candidate params to the meta loss.
void meta_step(PolicyParams& params, const std::function<double(const PolicyParams&)>& loss,
               const MetaConfig& cfg, std::size_t epoch, manifold::RAdamState& adam_power,
               manifold::RAdamState& adam_phase, SeededRng& rng);

struct TaskOutcome {
  ProductManifoldPoint best;
  double value = 0.0;
  double start_value = 0.0;  // objective at the warm-started point
  std::vector<double> epoch_loss;
};

struct MhaclResult {
  std::vector<TaskOutcome> tasks;
  OptimizerTrace trace;
};

/// Runs the continual procedure over a stream of tasks, updating `state`.
/// `init` provides the phases of the first task when the state has none.
MhaclResult mhacl_run(std::span<Objective* const> tasks, const em::PhaseTensor& init,
                      const MetaConfig& cfg, ContinualState& state, SeededRng& rng);

/// Grid shape for N meta-atoms: the config's atoms_x × atoms_y when they
/// match, else 1×N.
[[nodiscard]] std::pair<std::size_t, std::size_t> grid_shape(std::size_t atoms,
                                                             std::size_t atoms_x,
                                                             std::size_t atoms_y);

}  // namespace simsec::mhacl
