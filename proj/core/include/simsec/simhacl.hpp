#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "simsec/manifold.hpp"
#include "simsec/rng.hpp"
#include "simsec/secrecy.hpp"

namespace simsec::manifold {

/// Value and gradient oracle for the optimizers.
class Objective {
 public:
  virtual ~Objective() = default;
  [[nodiscard]] virtual std::size_t users() const = 0;
  [[nodiscard]] virtual std::size_t layers() const = 0;
  [[nodiscard]] virtual std::size_t atoms() const = 0;
  [[nodiscard]] virtual double budget() const = 0;
  virtual double value(const ProductManifoldPoint& point) = 0;
  virtual double gradient(const ProductManifoldPoint& point, secrecy::GradientBundle& out,
                          secrecy::ClampMode mode) = 0;
  /// Snaps the phases of `point` onto the codebook and returns the new value.
  /// The default only rounds; implementations may refine further.
  virtual double quantize(ProductManifoldPoint& point, const QuantizationCodebook& codebook,
                          std::size_t polish_sweeps);
};

/// The WSSR of one task.
class WssrObjective final : public Objective {
 public:
  explicit WssrObjective(const secrecy::Task& task) : evaluator_(task) {}

  [[nodiscard]] std::size_t users() const override { return evaluator_.task().users(); }
  [[nodiscard]] std::size_t layers() const override { return evaluator_.task().layers(); }
  [[nodiscard]] std::size_t atoms() const override { return evaluator_.task().atoms(); }
  [[nodiscard]] double budget() const override { return evaluator_.task().budget; }
  double value(const ProductManifoldPoint& point) override;
  double gradient(const ProductManifoldPoint& point, secrecy::GradientBundle& out,
                  secrecy::ClampMode mode) override;
  /// Rounds, then runs `polish_sweeps` sweeps of refine_quantized.
  double quantize(ProductManifoldPoint& point, const QuantizationCodebook& codebook,
                  std::size_t polish_sweeps) override;

  [[nodiscard]] secrecy::WssrEvaluator& evaluator() noexcept { return evaluator_; }

 private:
  secrecy::WssrEvaluator evaluator_;
};

/// Gradient with the fallback used by every optimizer: when all users are
/// clamped the clamped gradient vanishes, so the unclamped one is returned
/// instead. The return value is always the clamped objective.
double ascent_gradient(Objective& objective, const ProductManifoldPoint& point,
                       secrecy::GradientBundle& out);

enum class StepRule {
  JointAdam,    // one Riemannian Adam step on both blocks per iteration
  Alternating,  // squashed phase step, then a plain projected power step
};

struct SimhaclOptions {
  std::size_t max_iterations = 2000;
  std::size_t window = 50;
  double tolerance = 1e-6;
  bool early_stop = true;
  std::size_t restarts = 8;
  StepRule rule = StepRule::JointAdam;

  double phase_lr = 0.05;        // Adam rate on phases (rad)
  double power_lr = 0.01;        // Adam rate on amplitudes, in units of √P_A

  double squash_scale = 0.1;     // alternating: Δφ = s·(σ(κ g) − 1/2)
  double squash_kappa = 1.0;
  double power_step = 0.02;      // alternating: a + η g_a with η = power_step·P_A

  bool optimize_phases = true;   // false: power-only baseline
  std::optional<QuantizationCodebook> codebook;
  bool polish = true;            // codeword coordinate ascent after quantization
  std::size_t polish_sweeps = 3;

  void validate() const;
};

struct SimhaclResult {
  ProductManifoldPoint point;        // best point (quantized when a codebook is set)
  double value = 0.0;                // objective at `point`
  double continuous_value = 0.0;     // best value before quantization
  std::size_t best_restart = 0;
  std::size_t iterations = 0;        // total over all restarts
  OptimizerTrace trace;              // all restarts, concatenated
  std::vector<ProductManifoldPoint> restart_points;  // continuous best of each restart
};

/// Runs one restart from `start` and returns its best visited point.
SimhaclResult simhacl_single(Objective& objective, const ProductManifoldPoint& start,
                             const SimhaclOptions& options);

/// Restart 0 starts from `init` phases, later restarts from uniform random
/// phases; all start at equal power √(P_A/K).
SimhaclResult simhacl_optimize(Objective& objective, const em::PhaseTensor& init,
                               const SimhaclOptions& options, SeededRng& rng);

/// Equal-power point with the given phases.
[[nodiscard]] ProductManifoldPoint equal_power_point(const em::PhaseTensor& phases,
                                                     std::size_t users, double budget);

/// σ(κ g) − 1/2 scaled by s, elementwise.
[[nodiscard]] double squashed_step(double g, double scale, double kappa) noexcept;

}  // namespace simsec::manifold
