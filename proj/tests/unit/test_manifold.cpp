#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "simsec/errors.hpp"
#include "simsec/manifold.hpp"
#include "test_support.hpp"

using namespace simsec;
using namespace simsec::manifold;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST(TorusRetract, Examples) {
  EXPECT_NEAR(torus_retract(0.3, 2 * kPi), 0.3, 1e-15);
  EXPECT_NEAR(torus_retract(0.1, -0.2), 2 * kPi - 0.1, 1e-15);
  EXPECT_EQ(torus_retract(1.234, 0.0), 1.234);
}

TEST(TorusRetract, TensorForm) {
  const em::PhaseTensor p(1, 3, {0.0, 1.0, 6.0});
  const std::vector<double> step{-0.5, 0.5, 0.5};
  const auto q = torus_retract(p, step);
  EXPECT_NEAR(q(0, 0), 2 * kPi - 0.5, 1e-15);
  EXPECT_NEAR(q(0, 1), 1.5, 1e-15);
  EXPECT_NEAR(q(0, 2), 6.5 - 2 * kPi, 1e-15);
  EXPECT_THROW((void)torus_retract(p, std::vector<double>{1.0}), DimensionError);
}

TEST(PowerProject, Examples) {
  auto on = power_project(std::vector<double>{3, 4}, 25);
  EXPECT_NEAR(on[0], 3, 1e-14);
  EXPECT_NEAR(on[1], 4, 1e-14);
  auto scaled = power_project(std::vector<double>{3, 4}, 1);
  EXPECT_NEAR(scaled[0], 0.6, 1e-15);
  EXPECT_NEAR(scaled[1], 0.8, 1e-15);
  auto clipped = power_project(std::vector<double>{-1, 1}, 2);
  EXPECT_EQ(clipped[0], 0.0);
  EXPECT_NEAR(clipped[1], std::sqrt(2.0), 1e-15);
}

TEST(PowerProject, Errors) {
  EXPECT_THROW((void)power_project(std::vector<double>{0, 0}, 1), NumericalError);
  EXPECT_THROW((void)power_project(std::vector<double>{-1, -2}, 1), NumericalError);
  EXPECT_THROW((void)power_project(std::vector<double>{1, 1}, 0), ConfigError);
}

TEST(PowerProject, AlwaysLandsOnSphere) {
  SeededRng rng(1, {});
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> x(5);
    for (auto& v : x) v = rng.normal();
    if (std::all_of(x.begin(), x.end(), [](double v) { return v <= 0; })) continue;
    const double budget = rng.uniform(0.1, 10.0);
    const auto a = power_project(x, budget);
    double s = 0;
    for (double v : a) {
      EXPECT_GE(v, 0.0);
      s += v * v;
    }
    EXPECT_NEAR(s, budget, 1e-12 * budget);
  }
}

TEST(PowerTangent, RadialAndOrthogonal) {
  const std::vector<double> a{0.6, 0.8};
  const auto radial = project_power_tangent(std::vector<double>{1.2, 1.6}, a, 1.0);
  EXPECT_NEAR(radial[0], 0.0, 1e-15);
  EXPECT_NEAR(radial[1], 0.0, 1e-15);
  const auto orth = project_power_tangent(std::vector<double>{0.8, -0.6}, a, 1.0);
  EXPECT_NEAR(orth[0], 0.8, 1e-15);
  EXPECT_NEAR(orth[1], -0.6, 1e-15);
}

TEST(ProductPoint, Validation) {
  ProductManifoldPoint p{em::PhaseTensor(1, 2), {0.6, 0.8}, 1.0};
  EXPECT_NO_THROW(p.validate());
  p.a = {0.6, 0.9};
  EXPECT_THROW(p.validate(), NumericalError);
  p.a = {-0.6, 0.8};
  EXPECT_THROW(p.validate(), NumericalError);
}

TEST(Adam, ZeroGradientIsNullStep) {
  ManifoldAdam st{RAdamState(2, 0.05), RAdamState(2, 0.01)};
  ProductManifoldPoint p{em::PhaseTensor(1, 2, {0.5, 1.5}), {0.6, 0.8}, 1.0};
  const Tangent g{{0.0, 0.0}, {0.0, 0.0}};
  const auto q = radam_step(st, g, p);
  EXPECT_EQ(q.phases, p.phases);
  EXPECT_NEAR(q.a[0], 0.6, 1e-15);
  EXPECT_NEAR(q.a[1], 0.8, 1e-15);
}

TEST(Adam, ConstantGradientGivesUnitEffectiveStep) {
  // Scalar simulation of the moment recursions with bias correction.
  RAdamState s(1, 0.01);
  double m = 0, v = 0, step = 0;
  for (int t = 1; t <= 1000; ++t) {
    const double g = 3.7;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double oracle = 0.01 * (m / (1 - std::pow(0.9, t))) /
                          (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    step = adam_update(s, std::vector<double>{g})[0];
    ASSERT_NEAR(step, oracle, 1e-15);
  }
  EXPECT_NEAR(std::fabs(step), 0.01, 0.01 * 0.01);
  EXPECT_EQ(s.t, 1000u);
  EXPECT_THROW((void)adam_update(s, std::vector<double>{1, 2}), DimensionError);
}

TEST(Adam, StepsStayOnManifold) {
  auto in = fixtures::make_instance(3, 2, 2, 2, 2);
  secrecy::WssrEvaluator ev(in.task);
  ProductManifoldPoint p{in.phases, in.a, in.task.budget};
  ManifoldAdam st{RAdamState(p.phases.size(), 0.05), RAdamState(3, 0.01)};
  secrecy::GradientBundle g;
  for (int it = 0; it < 200; ++it) {
    (void)ev.gradient(p.phases, p.a, g, secrecy::ClampMode::Unclamped);
    p = radam_step(st, riemannian_grad(g, p), p);
    ASSERT_NO_THROW(p.validate(1e-10)) << "iteration " << it;
  }
}

TEST(Codebook, FullCircleNearest) {
  const auto cb = QuantizationCodebook::make(2);
  ASSERT_EQ(cb.codewords.size(), 4u);
  EXPECT_EQ(cb.nearest(0.8), 1u);
  EXPECT_EQ(cb.nearest(6.2), 0u);
  EXPECT_EQ(cb.nearest(kPi / 4), 0u);  // tie goes to the lower index
  EXPECT_EQ(cb.nearest(3 * kPi / 2 + 0.01), 3u);
}

TEST(Codebook, HalfCircleModeAndBounds) {
  const auto cb = QuantizationCodebook::make(1, CodebookMode::HalfCircle);
  ASSERT_EQ(cb.codewords.size(), 2u);
  EXPECT_EQ(cb.codewords[0], 0.0);
  EXPECT_NEAR(cb.codewords[1], kPi / 2, 1e-15);
  EXPECT_THROW((void)QuantizationCodebook::make(0), ConfigError);
  EXPECT_THROW((void)QuantizationCodebook::make(17), ConfigError);
}

TEST(Quantize, IdempotentAndMarked) {
  SeededRng rng(3, {});
  const auto p = em::PhaseTensor::random(2, 8, rng);
  for (int b : {1, 2, 3, 5}) {
    const auto cb = QuantizationCodebook::make(b);
    const auto q = quantize_phases(p, cb);
    ASSERT_TRUE(q.quantized());
    for (std::size_t i = 0; i < q.size(); ++i) {
      const int idx = (*q.indices())[i];
      EXPECT_EQ(q.values()[i], cb.codewords[idx]);
    }
    EXPECT_EQ(quantize_phases(q, cb), q);
  }
}

TEST(Refine, NeverWorseThanRoundingAndStaysOnCodebook) {
  const auto cb = QuantizationCodebook::make(2);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto in = fixtures::make_instance(2, 2, 2, 2, 40 + seed);
    secrecy::WssrEvaluator ev(in.task);
    auto q = quantize_phases(in.phases, cb);
    const double rounded = ev.value(q, in.a);
    const double refined = refine_quantized(ev, q, in.a, cb, 5);
    EXPECT_GE(refined, rounded);
    EXPECT_NEAR(refined, ev.value(q, in.a), 1e-12 * std::max(1.0, refined));
    ASSERT_TRUE(q.quantized());
    for (std::size_t i = 0; i < q.size(); ++i)
      EXPECT_EQ(q.values()[i], cb.codewords[(*q.indices())[i]]);
  }
}

TEST(Refine, ReachesCoordinateOptimum) {
  const auto cb = QuantizationCodebook::make(2);
  auto in = fixtures::make_instance(2, 1, 2, 2, 77);
  secrecy::WssrEvaluator ev(in.task);
  auto q = quantize_phases(in.phases, cb);
  const double v = refine_quantized(ev, q, in.a, cb, 50);
  // No single-atom codeword change improves the result.
  for (std::size_t n = 0; n < 4; ++n) {
    for (double c : cb.codewords) {
      auto probe = q;
      probe.set(0, n, c);
      EXPECT_LE(ev.value(probe, in.a), v * (1 + 1e-12) + 1e-15);
    }
  }
}

TEST(Trace, BestIsRunningMaximumAndCsv) {
  OptimizerTrace t;
  t.push(1.0, 0.5, 0.001);
  t.push(0.5, 0.4, 0.001);
  t.push(2.0, 0.3, 0.001);
  EXPECT_EQ(t.best, (std::vector<double>{1.0, 1.0, 2.0}));
  std::ostringstream out;
  t.write_csv(out);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "iteration,wssr,best,grad_norm,seconds");
  int lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  EXPECT_EQ(lines, 3);
}
