#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "contagion/clearing.hpp"
#include "contagion/network.hpp"
#include "contagion/paths.hpp"

namespace contagion {

// X_i = log(x_expect_i / (x_expect_i - K_i)). Throws CapitalExceedsAssets if K_i >= x_expect_i.
std::vector<double> to_distance(std::span<const double> K, std::span<const double> x_expect);

// X_i(0) = log(x0_i / (psi(0) Lambda_i)) + integral of mu_i over [0, T].
std::vector<double> initial_distance(const LiabilityNetwork& net, const MarketModel& model,
                                     std::span<const double> x0);

struct ParticleState {
  Eigen::MatrixXd X;  // banks x grid points, right limits
  Eigen::MatrixXd F;  // banks x grid points
  Eigen::MatrixXd S;  // factors x grid points: sum of u^j over banks defaulted by t
  std::vector<double> times;
  SolvencyState solvency;
  std::vector<std::vector<double>> jumps;  // per event: Delta L as k sums of u^j

  // Sweep state at the current time.
  std::vector<double> H;       // sum over defaulted j of psi(tau_j) u^j
  std::vector<double> F_now;   // F_i(t-)

  // L^n_v(t) at grid point m, i.e. v . S(t_m).
  double loss_at(std::span<const double> v, std::size_t m) const;
  // Contagion process of bank i, component l, at grid point m (excludes bank i itself).
  double contagion(const LiabilityNetwork& net, std::size_t l, std::size_t i, std::size_t m) const;
};

struct ParticleCascade {
  std::vector<double> delta;             // Delta L as k sums of u^j over the default set
  std::vector<std::size_t> defaults;     // sorted
  std::vector<std::vector<std::size_t>> waves;
  std::vector<std::vector<double>> iterates;  // Delta^(m) per round, as k sums
};

// Threshold Theta(f; i) for an alive bank: the downward shift of X_i caused by
// an extra loss f = sum of u^j . v^i over newly defaulting j != i.
double particle_threshold(const LiabilityNetwork& net, double R, double t,
                          std::span<const double> H, double F_i, std::size_t i, double f);

// Cascade condition at time t: bank i defaults when X_pre_i <= Theta, with the
// window taken as (-inf, Theta].
ParticleCascade resolve_cascade_particle(double t, std::span<const double> X_pre,
                                         const ParticleState& state, const LiabilityNetwork& net,
                                         double R);

ParticleState simulate_particle_system(const PathBundle& paths, const LiabilityNetwork& net,
                                       double R);

struct EquivalenceReport {
  bool default_sets_match = true;
  std::size_t events = 0;
  double max_event_time_gap = 0.0;
  double max_distance_gap = 0.0;
};

EquivalenceReport compare_formulations(const PathBundle& paths, const LiabilityNetwork& net,
                                       double R);

}  // namespace contagion
