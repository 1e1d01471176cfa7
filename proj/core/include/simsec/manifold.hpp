#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "simsec/em_model.hpp"
#include "simsec/secrecy.hpp"

namespace simsec::manifold {

/// A point of T^{MN} × {a ≥ 0 : Σ a² = P_A}.
struct ProductManifoldPoint {
  em::PhaseTensor phases;
  std::vector<double> a;
  double budget = 0.0;

  /// Throws NumericalError unless a ≥ 0, |Σa² − P_A| ≤ tol·P_A and all phases
  /// lie in [0, 2π).
  void validate(double tol = 1e-12) const;
};

/// (φ + ξ) mod 2π.
[[nodiscard]] double torus_retract(double phi, double step) noexcept;
[[nodiscard]] em::PhaseTensor torus_retract(const em::PhaseTensor& phases,
                                            std::span<const double> step);

/// Rescales onto the radius-√P_A sphere, clipping negatives and renormalizing
/// until none remain. Throws NumericalError for an all-zero input.
[[nodiscard]] std::vector<double> power_project(std::span<const double> a_tilde, double budget);

struct Tangent {
  std::vector<double> phase;  // layer-major M×N
  std::vector<double> power;  // K
};

/// Phase block unchanged; power block projected to g − (⟨g,a⟩/P_A)·a.
[[nodiscard]] Tangent riemannian_grad(const secrecy::GradientBundle& g,
                                      const ProductManifoldPoint& point);
[[nodiscard]] std::vector<double> project_power_tangent(std::span<const double> g,
                                                        std::span<const double> a,
                                                        double budget);

/// Adam moments for one coordinate block.
struct RAdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t t = 0;
  double alpha = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  RAdamState() = default;
  RAdamState(std::size_t n, double alpha);

  friend bool operator==(const RAdamState&, const RAdamState&) = default;
};

/// Updates the moments with g and returns the bias-corrected step α·m̂/(√v̂+ε).
[[nodiscard]] std::vector<double> adam_update(RAdamState& state, std::span<const double> g);

/// Separate Adam states for the phase and power blocks.
struct ManifoldAdam {
  RAdamState phase;
  RAdamState power;
};

/// One ascent step: phases via torus_retract, amplitudes via power_project.
/// The power moment is projected onto the tangent space at the new point.
[[nodiscard]] ProductManifoldPoint radam_step(ManifoldAdam& state, const Tangent& g,
                                              const ProductManifoldPoint& point);

enum class CodebookMode { FullCircle, HalfCircle };

struct QuantizationCodebook {
  int bits = 0;
  CodebookMode mode = CodebookMode::FullCircle;
  std::vector<double> codewords;

  /// Throws ConfigError unless 1 ≤ bits ≤ 16.
  static QuantizationCodebook make(int bits, CodebookMode mode = CodebookMode::FullCircle);
  /// Nearest codeword by circular distance; ties go to the smaller index.
  [[nodiscard]] std::size_t nearest(double phi) const;
};

[[nodiscard]] em::PhaseTensor quantize_phases(const em::PhaseTensor& phases,
                                              const QuantizationCodebook& codebook);

/// Coordinate ascent over codewords, one meta-atom at a time, at fixed power.
/// Every accepted move strictly increases the objective. Returns the final
/// objective value.
double refine_quantized(secrecy::WssrEvaluator& evaluator, em::PhaseTensor& phases,
                        std::span<const double> a, const QuantizationCodebook& codebook,
                        std::size_t max_sweeps = 3);

struct OptimizerTrace {
  std::vector<double> wssr;
  std::vector<double> best;
  std::vector<double> grad_norm;
  std::vector<double> seconds;

  [[nodiscard]] std::size_t iterations() const noexcept { return wssr.size(); }
  void push(double value, double grad_norm_value, double elapsed_s);
  void append(const OptimizerTrace& other);
  /// Columns: iteration,wssr,best,grad_norm,seconds.
  void write_csv(std::ostream& out) const;
};

}  // namespace simsec::manifold
