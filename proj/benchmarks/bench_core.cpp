#include <benchmark/benchmark.h>

#include <memory>

#include "simsec/em_model.hpp"
#include "simsec/mhacl.hpp"
#include "simsec/secrecy.hpp"
#include "simsec/simhacl.hpp"

namespace {

using namespace simsec;

struct Fixture {
  SystemConfig cfg;
  std::shared_ptr<em::SimSystem> sys;
  secrecy::Task task;
  em::PhaseTensor phases;

  explicit Fixture(std::size_t layers, std::size_t side = 8) {
    cfg.layers = layers;
    cfg.atoms_x = cfg.atoms_y = side;
    sys = std::make_shared<em::SimSystem>(em::build_system(cfg));
    SeededRng rng(7, {0, 0, 0});
    task = secrecy::make_task(
        cfg, std::shared_ptr<const em::PropagationSet>(sys, &sys->propagation),
        em::sample_scenario(cfg, sys->correlation, rng));
    phases = em::PhaseTensor::random(cfg.layers, cfg.atoms(), rng);
  }
};

void BM_ComposeG(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(em::compose_G(f.phases, f.sys->propagation));
}
BENCHMARK(BM_ComposeG)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_Gradient(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)));
  secrecy::WssrEvaluator ev(f.task);
  const auto a = secrecy::PowerAmplitudes::equal(f.cfg.users, f.cfg.total_power_w).a;
  secrecy::GradientBundle g;
  double shift = 0.0;
  for (auto _ : state) {
    // Perturb one phase so the evaluator cache never hits.
    shift += 1e-3;
    f.phases.set(0, 0, shift);
    benchmark::DoNotOptimize(ev.gradient(f.phases, a, g));
  }
}
BENCHMARK(BM_Gradient)->Arg(2)->Arg(4)->Arg(6)->Arg(8)->Unit(benchmark::kMicrosecond);

void BM_SimhaclIteration(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)));
  manifold::WssrObjective obj(f.task);
  manifold::SimhaclOptions o;
  o.max_iterations = 50;
  o.early_stop = false;
  auto start = manifold::equal_power_point(f.phases, f.cfg.users, f.cfg.total_power_w);
  for (auto _ : state) benchmark::DoNotOptimize(manifold::simhacl_single(obj, start, o).value);
  state.SetItemsProcessed(state.iterations() * 50);
}
BENCHMARK(BM_SimhaclIteration)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_MhaclInnerStep(benchmark::State& state) {
  Fixture f(4);
  manifold::WssrObjective obj(f.task);
  mhacl::MetaConfig cfg;
  const auto params = mhacl::PolicyParams::identity(f.cfg.users, 4, 8, 8, cfg.psn_scale);
  const mhacl::DctBasis basis(8, 8);
  auto start = manifold::equal_power_point(f.phases, f.cfg.users, f.cfg.total_power_w);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mhacl::inner_loop(obj, start, params, basis, cfg, 10).best_value);
  }
  state.SetItemsProcessed(state.iterations() * 10);
}
BENCHMARK(BM_MhaclInnerStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
