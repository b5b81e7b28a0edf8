#include <cstdint>
#include <vector>

#include <benchmark/benchmark.h>

#include "contagion/clearing.hpp"
#include "contagion/meanfield.hpp"
#include "contagion/montecarlo.hpp"
#include "contagion/network.hpp"
#include "contagion/paths.hpp"

using namespace contagion;

namespace {

struct Cloud {
  std::vector<double> X;
  std::vector<char> alive;
  std::vector<std::uint32_t> type;
  StepCoefficients c;
};

Cloud make_cloud(std::size_t P) {
  Cloud cl;
  cl.X.resize(P);
  cl.alive.assign(P, 1);
  cl.type.resize(P);
  for (std::size_t p = 0; p < P; ++p) {
    cl.type[p] = static_cast<std::uint32_t>(p % 4);
    cl.X[p] = 0.5 + 0.001 * double(p % 1000);
  }
  cl.c.drift = {-0.0001, -0.0001, -0.0001, -0.0001};
  cl.c.vol = {0.2, 0.2, 0.2, 0.2};
  cl.c.idio = 0.25;
  cl.c.common = 0.01;
  cl.c.sqrt_dt = 0.05;
  return cl;
}

void BM_AdvanceParticles(benchmark::State& state) {
  auto cl = make_cloud(static_cast<std::size_t>(state.range(0)));
  std::uint64_t step = 0;
  for (auto _ : state) {
    advance_particles(cl.X, cl.alive, cl.type, cl.c, 7, step++);
    benchmark::DoNotOptimize(cl.X.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_AdvanceParticlesSerial(benchmark::State& state) {
  auto cl = make_cloud(static_cast<std::size_t>(state.range(0)));
  std::uint64_t step = 0;
  for (auto _ : state) {
    advance_particles_serial(cl.X, cl.alive, cl.type, cl.c, 7, step++);
    benchmark::DoNotOptimize(cl.X.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

struct Finite {
  LiabilityNetwork net;
  MarketModel model;
  std::vector<double> x0;
  TimeGrid grid;
};

Finite make_finite() {
  std::vector<TypeVector> types;
  std::vector<double> ext, x0;
  MarketModel m;
  m.rho = 0.5;
  for (std::size_t i = 0; i < 20; ++i) {
    const double a = 0.5 + 0.05 * double(i % 7), b = 0.3 + 0.04 * double(i % 5);
    types.push_back({{a, b}, {b, a}});
    ext.push_back(3.0);
    m.mu.emplace_back(0.0);
    m.sigma.emplace_back(0.3);
  }
  auto net = build_low_rank(types, ext, RepaymentSchedule::linear(1.0));
  for (std::size_t i = 0; i < 20; ++i) x0.push_back(1.3 * net.net_liability(i));
  return {std::move(net), std::move(m), std::move(x0), TimeGrid::uniform(1.0, 250)};
}

void BM_RunScenarios(benchmark::State& state) {
  const auto f = make_finite();
  for (auto _ : state) {
    auto out = run_scenarios(64, 0, [&](std::size_t s) {
      return greatest_clearing(simulate_paths(f.model, f.x0, f.grid, s), f.net, 0.4).state.tau;
    });
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_RunScenariosSerial(benchmark::State& state) {
  const auto f = make_finite();
  for (auto _ : state) {
    auto out = run_scenarios_serial(64, [&](std::size_t s) {
      return greatest_clearing(simulate_paths(f.model, f.x0, f.grid, s), f.net, 0.4).state.tau;
    });
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_AdvanceParticles)->Arg(10000)->Arg(100000)->Arg(1000000);
BENCHMARK(BM_AdvanceParticlesSerial)->Arg(10000)->Arg(100000)->Arg(1000000);
BENCHMARK(BM_RunScenarios)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RunScenariosSerial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
