#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "contagion/clearing.hpp"
#include "contagion/network.hpp"
#include "contagion/paths.hpp"

namespace contagion {

enum class DefaultCause { none, illiquid, insolvent, both };

std::string to_string(DefaultCause c);

enum class CashKind { illiquidity_only, joint };

// Cash increment of a solvent bank at another bank's default.
struct CashJump {
  double time = 0.0;
  std::size_t bank = 0;
  std::vector<std::size_t> defaulters;
  double jump = 0.0;
};

struct CashSolution {
  Eigen::MatrixXd V;  // banks x grid points, right limits
  SolvencyState state;
  CashKind kind = CashKind::illiquidity_only;
  std::vector<DefaultCause> cause;
  std::vector<CashJump> jumps;
};

// Cash account at time t given default times, by direct summation of
// cumulative obligations L_ij(t) = (psi(0) - psi(t)) lambda_ij.
std::vector<double> cash_given_solvency(double t, const PathBundle& paths,
                                        const LiabilityNetwork& net, double R,
                                        std::span<const double> tau);

// Defaults when V_i <= 0; each default accelerates the defaulter's remaining
// obligations at recovery R into its counterparties' cash accounts.
CashSolution clearing_cash(const PathBundle& paths, const LiabilityNetwork& net, double R);

struct JointSolution {
  ClearingSolution capital;
  CashSolution cash;
};

// Default when min(V_i, K_i) <= 0. Illiquid banks enter the capital cascade as
// forced defaults. With cash_trigger = false the cash accounts are carried
// along but never trigger a default, which reproduces greatest_clearing.
JointSolution joint_clearing(const PathBundle& paths, const LiabilityNetwork& net, double R,
                             bool cash_trigger = true);

}  // namespace contagion
