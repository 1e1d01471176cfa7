#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "simsec/em_model.hpp"

namespace simsec::secrecy {

using linalg::Complex;

/// a_k = √p_k. The budget is Σ a_k² ≤ P_A.
struct PowerAmplitudes {
  std::vector<double> a;
  double budget = 0.0;

  static PowerAmplitudes equal(std::size_t users, double budget);
  [[nodiscard]] std::vector<double> powers() const;
  /// Throws if any a_k < 0 or the budget is exceeded by more than 1e-9 relative.
  void validate() const;
};

/// One optimization instance: fixed propagation, one channel draw, noise and
/// weights.
struct Task {
  std::shared_ptr<const em::PropagationSet> propagation;
  em::ChannelSet channels;
  std::vector<double> noise;  // σ_k²
  double eve_noise = 0.0;     // σ_e²
  std::vector<double> weights;
  std::vector<double> qos_min;  // empty: no thresholds
  double qos_penalty = 0.0;     // μ_QoS; 0 disables the penalty term
  double budget = 0.0;          // P_A

  [[nodiscard]] std::size_t users() const noexcept { return channels.users.size(); }
  [[nodiscard]] std::size_t layers() const noexcept { return propagation->layers(); }
  [[nodiscard]] std::size_t atoms() const noexcept { return propagation->atoms(); }
};

/// Builds a Task from a system and a channel draw using the config's noise,
/// weights and QoS thresholds.
[[nodiscard]] Task make_task(const SystemConfig& cfg,
                             std::shared_ptr<const em::PropagationSet> propagation,
                             em::ChannelSet channels);

/// |h_SIM,r^H G w_1^t|² for every receiver r and stream t.
struct LinkGains {
  std::size_t users = 0;
  std::vector<Complex> user_amp;  // K×K row-major: [receiver k][stream t]
  std::vector<Complex> eve_amp;   // K: stream t at the eavesdropper
  std::vector<double> user;       // |user_amp|²
  std::vector<double> eve;        // |eve_amp|²

  [[nodiscard]] double at(std::size_t k, std::size_t t) const { return user[k * users + t]; }
};

[[nodiscard]] LinkGains gains_from_G(const Task& task, const linalg::CMatrix& g);

struct InterferenceTerms {
  std::vector<double> alpha;  // |h_k^H G w^k|²
  std::vector<double> beta;   // |h_e^H G w^k|²
  std::vector<double> user;   // I_k: other streams at Bob k plus σ_k²
  std::vector<double> eve;    // I_e for stream k
};

struct SinrResult {
  std::vector<double> gamma;
  std::vector<double> gamma_eve;
  InterferenceTerms terms;
};

[[nodiscard]] SinrResult sinr_from_gains(const LinkGains& gains, std::span<const double> a,
                                         std::span<const double> noise, double eve_noise);
/// SINRs of every Bob and of Eve for every stream, from an explicit G.
[[nodiscard]] SinrResult sinr_all(const Task& task, const linalg::CMatrix& g,
                                  std::span<const double> a);

struct SecrecyReport {
  std::vector<double> gamma;
  std::vector<double> gamma_eve;
  std::vector<double> raw_rate;  // log2(1+γ_k) − log2(1+γ_k^e), unclamped
  std::vector<double> rate;      // max(0, raw_rate)
  double wssr = 0.0;             // Σ η_k rate_k
  std::vector<bool> qos_ok;      // empty when no thresholds are configured
};

[[nodiscard]] SecrecyReport secrecy_rates(std::span<const double> gamma,
                                          std::span<const double> gamma_eve,
                                          std::span<const double> weights,
                                          std::span<const double> qos_min = {});

/// Gradients of the objective. `phase` and `phase_euclidean` are layer-major
/// M×N; `phase_euclidean` holds ∂R/∂Φ* so that phase = 2 Im(Φ* ⊙ ∂R/∂Φ*).
struct GradientBundle {
  std::vector<double> power;
  std::vector<double> phase;
  std::vector<Complex> phase_euclidean;
};

/// Clamped: users whose secrecy rate would be negative contribute nothing.
/// Unclamped: the smooth sum Σ η_k (log2(1+γ_k) − log2(1+γ_k^e)).
enum class ClampMode { Clamped, Unclamped };

/// Per-layer cascade factors: c_{r,t} = Σ_n back[r][n] e^{jφ_m^n} pre[t][n].
struct LayerFactors {
  std::size_t atoms = 0;
  std::size_t streams = 0;
  std::size_t receivers = 0;      // K users followed by the eavesdropper
  std::vector<Complex> pre;       // K×N, stream-major: columns of W_m Φ_{m−1} ⋯ Φ_1 W_1
  std::vector<Complex> back;      // (K+1)×N: h^H Φ_M W_M ⋯ Φ_{m+1} W_{m+1}
};

/// Evaluates the WSSR objective and its exact gradients for one task.
///
/// The cascade is never formed explicitly: a forward pass pushes the K
/// transmit columns through the layers and a backward pass pulls the K+1
/// receive rows back, so one evaluation costs O(M N² K). The most recent
/// forward/backward pass is cached by phase values, which makes power-only
/// iterations O(K²).
class WssrEvaluator {
 public:
  explicit WssrEvaluator(const Task& task);

  [[nodiscard]] const Task& task() const noexcept { return *task_; }

  [[nodiscard]] const LinkGains& gains(const em::PhaseTensor& phases);
  [[nodiscard]] double value(const em::PhaseTensor& phases, std::span<const double> a,
                             ClampMode mode = ClampMode::Clamped);
  [[nodiscard]] SecrecyReport report(const em::PhaseTensor& phases, std::span<const double> a);
  /// Objective value and gradients in one pass.
  [[nodiscard]] double gradient(const em::PhaseTensor& phases, std::span<const double> a,
                                GradientBundle& out, ClampMode mode = ClampMode::Clamped);
  [[nodiscard]] LayerFactors factors(const em::PhaseTensor& phases, std::size_t layer);

  /// Objective on precomputed gains (used by discrete search).
  [[nodiscard]] double value_from_gains(const LinkGains& gains, std::span<const double> a,
                                        ClampMode mode = ClampMode::Clamped) const;

  [[nodiscard]] std::size_t forward_passes() const noexcept { return forward_passes_; }

 private:
  void forward(const em::PhaseTensor& phases, bool keep_layers);
  void backward(const em::PhaseTensor& phases);

  const Task* task_;
  std::vector<std::vector<Complex>> h_conj_;  // receivers × N, conj(h_r)
  std::vector<std::vector<Complex>> diag_;    // per-layer e^{jφ}
  std::vector<std::vector<Complex>> pre_;     // per-layer K×N
  std::vector<std::vector<Complex>> back_;    // per-layer R×N
  LinkGains gains_;
  std::vector<double> cached_phases_;
  bool cache_valid_ = false;
  bool layers_valid_ = false;
  bool back_valid_ = false;
  std::size_t forward_passes_ = 0;
};

/// grad_power / grad_phase with the clamp convention (clamped users give 0).
[[nodiscard]] std::vector<double> grad_power(const Task& task, const em::PhaseTensor& phases,
                                             std::span<const double> a);
[[nodiscard]] std::vector<double> grad_phase(const Task& task, const em::PhaseTensor& phases,
                                             std::span<const double> a);

/// Central differences of f, one coordinate at a time.
[[nodiscard]] std::vector<double> fd_gradient(
    const std::function<double(std::span<const double>)>& f, std::span<const double> x,
    double step);

enum class FdTarget { Power, Phase };

/// Central-difference gradient of the (clamped) objective.
[[nodiscard]] std::vector<double> fd_gradient(const Task& task, const em::PhaseTensor& phases,
                                              std::span<const double> a, FdTarget which,
                                              double step);

}  // namespace simsec::secrecy
