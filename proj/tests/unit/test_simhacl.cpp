#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "simsec/errors.hpp"
#include "simsec/simhacl.hpp"
#include "test_support.hpp"

using namespace simsec;
using namespace simsec::manifold;

namespace {

SimhaclOptions quick(std::size_t iterations = 300, std::size_t restarts = 1) {
  SimhaclOptions o;
  o.max_iterations = iterations;
  o.restarts = restarts;
  return o;
}

/// Returns NaN after a fixed number of evaluations.
class BrokenObjective final : public Objective {
 public:
  explicit BrokenObjective(const secrecy::Task& task) : inner_(task) {}
  std::size_t users() const override { return inner_.users(); }
  std::size_t layers() const override { return inner_.layers(); }
  std::size_t atoms() const override { return inner_.atoms(); }
  double budget() const override { return inner_.budget(); }
  double value(const ProductManifoldPoint& p) override {
    return ++calls_ > 5 ? std::nan("") : inner_.value(p);
  }
  double gradient(const ProductManifoldPoint& p, secrecy::GradientBundle& out,
                  secrecy::ClampMode mode) override {
    return inner_.gradient(p, out, mode);
  }

 private:
  WssrObjective inner_;
  int calls_ = 0;
};

}  // namespace

TEST(Squash, CenteredAndOdd) {
  EXPECT_EQ(squashed_step(0.0, 0.1, 1.0), 0.0);
  EXPECT_NEAR(squashed_step(2.0, 0.1, 1.0), -squashed_step(-2.0, 0.1, 1.0), 1e-16);
  EXPECT_NEAR(squashed_step(1e6, 0.1, 1.0), 0.05, 1e-12);
  EXPECT_NEAR(squashed_step(1.0, 0.1, 1.0), 0.1 * (1.0 / (1.0 + std::exp(-1.0)) - 0.5), 1e-16);
}

TEST(Options, Validation) {
  SimhaclOptions o;
  EXPECT_NO_THROW(o.validate());
  o.window = 0;
  EXPECT_THROW(o.validate(), ConfigError);
  o = {};
  o.restarts = 0;
  EXPECT_THROW(o.validate(), ConfigError);
  o = {};
  o.phase_lr = -1;
  EXPECT_THROW(o.validate(), ConfigError);
}

TEST(Simhacl, BestSoFarIsMonotoneAndFinalPointIsFeasible) {
  for (StepRule rule : {StepRule::JointAdam, StepRule::Alternating}) {
    auto in = fixtures::make_instance(3, 2, 3, 3, 1);
    WssrObjective obj(in.task);
    SeededRng rng(1, {});
    auto o = quick(400, 3);
    o.rule = rule;
    const auto r = simhacl_optimize(obj, in.phases, o, rng);
    for (std::size_t i = 1; i < r.trace.iterations(); ++i) {
      ASSERT_GE(r.trace.best[i], r.trace.best[i - 1]);
      ASSERT_GE(r.trace.best[i], r.trace.wssr[i]);
    }
    EXPECT_NO_THROW(r.point.validate(1e-10));
    double s = 0;
    for (double a : r.point.a) s += a * a;
    EXPECT_NEAR(s, in.task.budget, 1e-10);
    EXPECT_EQ(r.restart_points.size(), 3u);
    for (const auto& p : r.restart_points) EXPECT_NO_THROW(p.validate(1e-10));
    EXPECT_NEAR(obj.value(r.point), r.value, 1e-12 * std::max(1.0, r.value));
    EXPECT_EQ(r.iterations, r.trace.iterations());
  }
}

TEST(Simhacl, ImprovesOnEqualPowerStart) {
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto in = fixtures::make_instance(2, 2, 3, 3, 20 + seed);
    WssrObjective obj(in.task);
    const double start = obj.value(equal_power_point(in.phases, 2, in.task.budget));
    SeededRng rng(seed, {});
    const auto r = simhacl_optimize(obj, in.phases, quick(), rng);
    EXPECT_GE(r.value, start);
    improved += r.value > start * 1.05;
  }
  EXPECT_GE(improved, 8);
}

TEST(Simhacl, DeterministicForFixedStream) {
  auto in = fixtures::make_instance(2, 2, 2, 2, 3);
  WssrObjective a(in.task), b(in.task);
  SeededRng ra(9, {1, 2, 3}), rb(9, {1, 2, 3});
  const auto x = simhacl_optimize(a, in.phases, quick(100, 3), ra);
  const auto y = simhacl_optimize(b, in.phases, quick(100, 3), rb);
  EXPECT_EQ(x.value, y.value);
  EXPECT_EQ(x.point.phases, y.point.phases);
  EXPECT_EQ(x.point.a, y.point.a);
}

TEST(Simhacl, PowerOnlyKeepsPhasesFixed) {
  auto in = fixtures::make_instance(3, 2, 2, 2, 4);
  WssrObjective obj(in.task);
  SeededRng rng(4, {});
  auto o = quick(200, 8);
  o.optimize_phases = false;
  const auto r = simhacl_optimize(obj, in.phases, o, rng);
  EXPECT_EQ(r.point.phases.values().size(), in.phases.values().size());
  for (std::size_t i = 0; i < in.phases.size(); ++i)
    EXPECT_EQ(r.point.phases.values()[i], in.phases.values()[i]);
  EXPECT_EQ(r.restart_points.size(), 1u);
}

TEST(Simhacl, EarlyStopHonoursWindow) {
  auto in = fixtures::make_instance(2, 1, 2, 2, 5);
  WssrObjective obj(in.task);
  SeededRng rng(5, {});
  auto o = quick(5000);
  o.window = 20;
  o.tolerance = 1e-3;
  const auto r = simhacl_optimize(obj, in.phases, o, rng);
  EXPECT_LT(r.iterations, 5000u);
  EXPECT_GT(r.iterations, 20u);
  o.early_stop = false;
  o.max_iterations = 150;
  SeededRng rng2(5, {});
  EXPECT_EQ(simhacl_optimize(obj, in.phases, o, rng2).iterations, 150u);
}

TEST(Simhacl, NonFiniteObjectiveThrows) {
  auto in = fixtures::make_instance(2, 1, 2, 2, 6);
  BrokenObjective obj(in.task);
  SeededRng rng(6, {});
  EXPECT_THROW((void)simhacl_optimize(obj, in.phases, quick(), rng), NumericalError);
}

TEST(Simhacl, RejectsMismatchedInit) {
  auto in = fixtures::make_instance(2, 2, 2, 2, 7);
  WssrObjective obj(in.task);
  SeededRng rng(7, {});
  EXPECT_THROW((void)simhacl_optimize(obj, em::PhaseTensor(1, 4), quick(), rng), DimensionError);
}

TEST(AscentGradient, FallsBackToUnclampedWhenAllUsersClamped) {
  auto in = fixtures::make_instance(2, 2, 2, 2, 8);
  in.task.eve_noise *= 1e-9;  // Eve hears everything far better than any Bob
  WssrObjective obj(in.task);
  const ProductManifoldPoint p{in.phases, in.a, in.task.budget};
  const auto rep = obj.evaluator().report(p.phases, p.a);
  for (double r : rep.raw_rate) ASSERT_LT(r, 0.0);
  secrecy::GradientBundle clamped, unclamped, got;
  (void)obj.gradient(p, clamped, secrecy::ClampMode::Clamped);
  EXPECT_EQ(fixtures::max_abs(clamped.power), 0.0);
  (void)obj.gradient(p, unclamped, secrecy::ClampMode::Unclamped);
  const double v = ascent_gradient(obj, p, got);
  EXPECT_EQ(v, 0.0);
  EXPECT_EQ(got.power, unclamped.power);
  EXPECT_EQ(got.phase, unclamped.phase);
}

TEST(AscentGradient, UsesClampedGradientOtherwise) {
  auto in = fixtures::make_instance(2, 2, 2, 2, 9);
  WssrObjective obj(in.task);
  const ProductManifoldPoint p{in.phases, in.a, in.task.budget};
  if (obj.value(p) == 0.0) GTEST_SKIP();
  secrecy::GradientBundle clamped, got;
  (void)obj.gradient(p, clamped, secrecy::ClampMode::Clamped);
  (void)ascent_gradient(obj, p, got);
  EXPECT_EQ(got.power, clamped.power);
}

TEST(Simhacl, QuantizedResultLiesOnCodebookAndBelowExhaustiveMaximum) {
  // K = 2, M = 1, N = 4, b = 1: 16 phase configurations.
  auto in = fixtures::make_instance(2, 1, 2, 2, 10);
  WssrObjective obj(in.task);
  auto o = quick(300, 4);
  o.codebook = QuantizationCodebook::make(1);
  SeededRng rng(10, {});
  const auto r = simhacl_optimize(obj, in.phases, o, rng);
  ASSERT_TRUE(r.point.phases.quantized());
  for (double v : r.point.phases.values()) EXPECT_TRUE(v == 0.0 || std::fabs(v - std::numbers::pi) < 1e-15);
  double best = 0.0;
  for (int mask = 0; mask < 16; ++mask) {
    std::vector<double> ph(4);
    for (int n = 0; n < 4; ++n) ph[n] = (mask >> n & 1) ? std::numbers::pi : 0.0;
    const em::PhaseTensor pt(1, 4, ph);
    for (int i = 0; i <= 200; ++i) {
      const double f = i / 200.0;
      const std::vector<double> a{std::sqrt(f * in.task.budget), std::sqrt((1 - f) * in.task.budget)};
      best = std::max(best, obj.evaluator().value(pt, a));
    }
  }
  EXPECT_LE(r.value, best * (1 + 1e-3) + 1e-12);
  EXPECT_LE(r.value, r.continuous_value * (1 + 1e-12) + 1e-12);
}

TEST(Quantization, MeanWssrDegradesAsBitsDecrease) {
  // Matched draws: one continuous optimum per draw, rounded at every depth.
  const std::vector<int> bits{4, 3, 2, 1};
  std::vector<std::vector<double>> vals(bits.size());
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto in = fixtures::make_instance(2, 2, 2, 2, 300 + seed);
    WssrObjective obj(in.task);
    SeededRng rng(seed, {});
    const auto r = simhacl_optimize(obj, in.phases, quick(150), rng);
    for (std::size_t i = 0; i < bits.size(); ++i) {
      ProductManifoldPoint p = r.point;
      vals[i].push_back(obj.quantize(p, QuantizationCodebook::make(bits[i]), 0));
    }
  }
  auto mean_sd = [](const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    m /= v.size();
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::pair{m, std::sqrt(s / (v.size() - 1) / v.size())};
  };
  for (std::size_t i = 1; i < bits.size(); ++i) {
    const auto [hi, se_hi] = mean_sd(vals[i - 1]);
    const auto [lo, se_lo] = mean_sd(vals[i]);
    EXPECT_LE(lo, hi + std::hypot(se_hi, se_lo)) << "bits " << bits[i];
  }
}
