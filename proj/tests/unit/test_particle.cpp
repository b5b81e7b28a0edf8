#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "contagion/clearing.hpp"
#include "contagion/error.hpp"
#include "contagion/particle.hpp"
#include "oracles.hpp"

using namespace contagion;

namespace {

MarketModel flat_model(std::size_t n, double mu = 0.0, double sigma = 0.0) {
  MarketModel m;
  for (std::size_t i = 0; i < n; ++i) m.mu.emplace_back(mu), m.sigma.emplace_back(sigma);
  return m;
}

// Particle state consistent with a cascade instance: F_i from the existing defaults.
ParticleState state_for(const oracle::CascadeInstance& c) {
  ParticleState st;
  st.solvency = c.state;
  st.H = c.H;
  const double psi0 = c.net.schedule().initial();
  for (std::size_t i = 0; i < c.net.size(); ++i) {
    const double loss = (1.0 - c.R) * c.net.scale() * dot(c.net.type(i).v, c.H);
    st.F_now.push_back(std::log1p(loss / (psi0 * c.net.net_liability(i))));
  }
  return st;
}

}  // namespace

TEST(Distance, Examples) {
  const std::vector<double> xe{10.0, 10.0, 10.0, 10.0};
  const auto X = to_distance(std::vector<double>{0.0, -1.0, 1.0, 5.0}, xe);
  EXPECT_DOUBLE_EQ(X[0], 0.0);
  EXPECT_LT(X[1], 0.0);
  EXPECT_GT(X[2], 0.0);
  EXPECT_NEAR(X[3], std::log(2.0), 1e-15);
  EXPECT_THROW(to_distance(std::vector<double>{10.0}, std::vector<double>{10.0}), CapitalExceedsAssets);
  EXPECT_THROW(to_distance(std::vector<double>{1.0, 2.0}, std::vector<double>{10.0}), DimensionMismatch);
}

TEST(Distance, InitialDistance) {
  auto net = build_low_rank({{{1.0}, {1.0}}, {{1.0}, {1.0}}}, {2.0, 3.0}, RepaymentSchedule::linear(1.0));
  const auto X = initial_distance(net, flat_model(2), std::vector<double>{2.0, std::exp(1.0) * 3.0});
  EXPECT_DOUBLE_EQ(X[0], 0.0);
  EXPECT_NEAR(X[1], 1.0, 1e-15);
  EXPECT_THROW(initial_distance(net, flat_model(2), std::vector<double>{0.0, 1.0}), NonPositiveInitialAsset);
}

TEST(Distance, AgreesWithCapitalAtZero) {
  std::mt19937_64 gen(41);
  for (int rep = 0; rep < 50; ++rep) {
    const auto s = oracle::random_scenario(gen);
    const auto p = simulate_paths(s.model, s.x0, s.grid, s.seed);
    const auto K = capital_given_solvency(0.0, p, s.net, s.R, std::vector<double>(s.net.size(), kNever));
    std::vector<double> xe;
    for (std::size_t i = 0; i < s.net.size(); ++i) xe.push_back(p.x_expect(i, 0));
    const auto a = to_distance(K, xe);
    const auto b = initial_distance(s.net, s.model, s.x0);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-10);
  }
}

TEST(ParticleSystem, FullRecoveryHasNoFeedback) {
  std::mt19937_64 gen(3);
  for (int rep = 0; rep < 20; ++rep) {
    const auto s = oracle::random_scenario(gen);
    const auto p = simulate_paths(s.model, s.x0, s.grid, s.seed);
    const auto st = simulate_particle_system(p, s.net, 1.0);
    EXPECT_EQ(st.F.cwiseAbs().maxCoeff(), 0.0);
    // Each bank's default time is its own first passage of log xe below log(psi0 Lambda).
    for (std::size_t i = 0; i < s.net.size(); ++i) {
      const double barrier = std::log(s.net.schedule().initial() * s.net.net_liability(i));
      std::size_t first = s.grid.points();
      for (std::size_t m = 0; m < s.grid.points(); ++m)
        if (p.log_xe(Eigen::Index(i), Eigen::Index(m)) <= barrier) {
          first = m;
          break;
        }
      if (first == s.grid.points()) {
        EXPECT_EQ(st.solvency.tau[i], kNever);
      } else {
        EXPECT_LE(st.solvency.tau[i], s.grid[first]);
        if (first > 0) EXPECT_GT(st.solvency.tau[i], s.grid[first - 1]);
      }
    }
  }
}

TEST(ParticleSystem, NoInterbankFactorsNoFeedback) {
  std::vector<TypeVector> t(3, {{0.0, 0.0}, {1.0, 2.0}});
  auto net = build_low_rank(t, {1.0, 1.0, 1.0}, RepaymentSchedule::linear(1.0));
  MarketModel m = flat_model(3, 0.0, 0.8);
  m.rho = 0.3;
  const auto grid = TimeGrid::uniform(1.0, 200);
  const auto p = simulate_paths(m, std::vector<double>{1.1, 1.2, 1.3}, grid, 19);
  const auto st = simulate_particle_system(p, net, 0.0);
  EXPECT_EQ(st.F.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(st.S.cwiseAbs().maxCoeff(), 0.0);
}

TEST(ParticleCascade, NoneBelowThreshold) {
  auto net = build_low_rank({{{1.0}, {1.0}}, {{1.0}, {1.0}}}, {2.0, 2.0}, RepaymentSchedule::linear(1.0));
  ParticleState st;
  st.solvency = SolvencyState(2);
  st.H = {0.0};
  st.F_now = {0.0, 0.0};
  const auto c = resolve_cascade_particle(0.3, std::vector<double>{0.2, 0.5}, st, net, 0.4);
  EXPECT_TRUE(c.defaults.empty());
  EXPECT_EQ(c.delta, std::vector<double>{0.0});
}

TEST(ParticleCascade, SingleDefaultSelfExclusion) {
  // k = 3, bank 1 defaults alone; the contagion increment seen by i != 1 is u^1, by bank 1 zero.
  std::vector<TypeVector> t{{{0.1, 0.0, 0.2}, {0.0, 0.1, 0.0}},
                            {{0.5, 0.3, 0.0}, {0.1, 0.0, 0.1}},
                            {{0.0, 0.2, 0.1}, {0.0, 0.0, 0.1}}};
  auto net = build_low_rank(t, {3.0, 3.0, 3.0}, RepaymentSchedule::linear(1.0));
  const auto grid = TimeGrid::uniform(1.0, 100);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(3, Eigen::Index(grid.points()));
  for (std::size_t m = 0; m < grid.points(); ++m) B(1, Eigen::Index(m)) = -4.0 * grid[m];
  std::vector<double> x0;
  for (std::size_t i = 0; i < 3; ++i) x0.push_back(net.net_liability(i) * (i == 1 ? std::exp(1.3) : 3.0));
  MarketModel m = flat_model(3);
  m.sigma[1] = TimeFunction(1.0);
  const auto p = paths_from_brownian(m, x0, grid, std::vector<double>(grid.points(), 0.0), B);
  const auto st = simulate_particle_system(p, net, 0.3);
  ASSERT_EQ(st.solvency.events.size(), 1u);
  EXPECT_EQ(st.solvency.events[0].defaults(), std::vector<std::size_t>{1});
  const auto last = grid.steps();
  for (std::size_t l = 0; l < 3; ++l) {
    EXPECT_DOUBLE_EQ(st.contagion(net, l, 0, last), t[1].u[l]);
    EXPECT_DOUBLE_EQ(st.contagion(net, l, 2, last), t[1].u[l]);
    EXPECT_DOUBLE_EQ(st.contagion(net, l, 1, last), 0.0);
  }
}

TEST(ParticleCascade, MatchesClearingCascade) {
  std::mt19937_64 gen(1618);
  int compared = 0;
  for (int rep = 0; rep < 300; ++rep) {
    const auto c = oracle::random_cascade_instance(gen);
    const auto st = state_for(c);
    const auto X = to_distance(c.K_pre, c.x_expect);
    const auto pc = resolve_cascade_particle(c.t, X, st, c.net, c.R);
    const auto cc = resolve_cascade(c.t, c.K_pre, c.state, c.net, c.R);
    std::vector<bool> solvent(c.net.size());
    for (std::size_t i = 0; i < c.net.size(); ++i) solvent[i] = c.state.solvent(i);
    const auto e = oracle::enumerate_cascade(c.K_pre, solvent, oracle::dense_lambda(c.net), c.R,
                                             c.net.schedule()(c.t));
    EXPECT_EQ(cc.defaults, e.least) << rep;
    // Exact capital ties anywhere along the cascade are not preserved by the
    // logarithm; compare where every bank clears its threshold by a margin.
    const double margin = oracle::cascade_margin(c.K_pre, solvent, oracle::dense_lambda(c.net), c.R,
                                                 c.net.schedule()(c.t));
    if (margin >= 1e-9) {
      EXPECT_EQ(pc.defaults, e.least) << rep;
      ++compared;
    }
    for (std::size_t w = 1; w < pc.waves.size(); ++w)
      for (std::size_t l = 0; l < c.net.factors(); ++l) EXPECT_GE(pc.iterates[w][l], pc.iterates[w - 1][l]);
  }
  EXPECT_GT(compared, 150);
}

TEST(ParticleSystem, FormulationEquivalence) {
  std::mt19937_64 gen(314);
  for (int rep = 0; rep < 60; ++rep) {
    const auto s = oracle::random_scenario(gen);
    const auto p = simulate_paths(s.model, s.x0, s.grid, s.seed);
    const auto r = compare_formulations(p, s.net, s.R);
    EXPECT_TRUE(r.default_sets_match) << rep;
    EXPECT_LE(r.max_event_time_gap, 1e-8);
    EXPECT_LE(r.max_distance_gap, 1e-8);
  }
}

TEST(ParticleSystem, FeedbackMonotoneAndEventDriven) {
  std::mt19937_64 gen(55);
  for (int rep = 0; rep < 30; ++rep) {
    const auto s = oracle::random_scenario(gen);
    const auto p = simulate_paths(s.model, s.x0, s.grid, s.seed);
    const auto st = simulate_particle_system(p, s.net, s.R);
    std::size_t waves = 0, defaults = 0;
    for (const auto& ev : st.solvency.events) waves += ev.waves.size(), defaults += ev.defaults().size();
    EXPECT_LE(waves, defaults);
    for (std::size_t m = 1; m < s.grid.points(); ++m) {
      bool event = false;
      for (const auto& ev : st.solvency.events) event |= ev.time > s.grid[m - 1] && ev.time <= s.grid[m];
      for (std::size_t i = 0; i < s.net.size(); ++i) {
        const double a = st.F(Eigen::Index(i), Eigen::Index(m - 1)), b = st.F(Eigen::Index(i), Eigen::Index(m));
        if (st.solvency.tau[i] > s.grid[m]) EXPECT_GE(b, a);
        if (!event) EXPECT_EQ(a, b);
      }
    }
  }
}
