#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "contagion/network.hpp"
#include "contagion/paths.hpp"

namespace contagion {

inline constexpr double kNever = std::numeric_limits<double>::infinity();

// Relative tolerance (times T) of event-time bisection.
inline constexpr double kEventTolerance = 1e-10;

struct CascadeEvent {
  double time = 0.0;
  // Cumulative waves: waves[m] is the default set known after m propagation rounds.
  std::vector<std::vector<std::size_t>> waves;

  const std::vector<std::size_t>& defaults() const { return waves.back(); }
};

struct SolvencyState {
  std::vector<double> tau;  // kNever while solvent
  std::vector<CascadeEvent> events;

  explicit SolvencyState(std::size_t n = 0) : tau(n, kNever) {}
  bool solvent(std::size_t i) const { return tau[i] == kNever; }
  bool solvent_at(std::size_t i, double t) const { return tau[i] > t; }
};

enum class ClearingKind { greatest, least };

struct ClearingSolution {
  Eigen::MatrixXd K;  // banks x grid points, right limits
  SolvencyState state;
  ClearingKind kind = ClearingKind::greatest;
};

struct CascadeResult {
  std::vector<std::size_t> defaults;  // sorted
  std::vector<std::vector<std::size_t>> waves;
};

void validate_recovery(double R);

// Capital at time t given default times (banks with tau_j <= t count as defaulted),
// in the factorised net-liability form.
std::vector<double> capital_given_solvency(double t, const PathBundle& paths,
                                           const LiabilityNetwork& net, double R,
                                           std::span<const double> tau);

// Same quantity summed over counterparties with cumulative obligations
// L_ij(t) = (psi(0) - psi(t)) lambda_ij.
std::vector<double> capital_given_solvency_direct(double t, const PathBundle& paths,
                                                  const LiabilityNetwork& net, double R,
                                                  std::span<const double> tau);

// Capital loss to bank i at time t if the banks in `set` default now:
// (1 - R) psi(t) sum_{j in set, j != i} lambda_ji.
double cascade_loss(const LiabilityNetwork& net, double R, double psi_t, std::size_t i,
                    std::span<const double> set_borrowing, bool i_in_set);

// Simultaneous defaults at an event. K_pre holds left limits; only banks that
// are solvent in `state` take part. `forced` banks default regardless of capital.
// greatest: smallest closed default set containing wave 0.
// least: largest self-consistent set among banks reachable from wave 0.
CascadeResult resolve_cascade(double t, std::span<const double> K_pre, const SolvencyState& state,
                              const LiabilityNetwork& net, double R,
                              ClearingKind kind = ClearingKind::greatest,
                              std::span<const std::size_t> forced = {});

ClearingSolution greatest_clearing(const PathBundle& paths, const LiabilityNetwork& net, double R);
ClearingSolution least_clearing(const PathBundle& paths, const LiabilityNetwork& net, double R);
ClearingSolution solve_clearing(const PathBundle& paths, const LiabilityNetwork& net, double R,
                                ClearingKind kind);

}  // namespace contagion
