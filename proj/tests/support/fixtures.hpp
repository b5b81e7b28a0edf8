#pragma once

#include <cmath>
#include <vector>

#include "contagion/meanfield.hpp"
#include "contagion/network.hpp"

namespace fixture {

// The tiered 4-type network: u = e_a, two top-tier lenders and two lower tiers.
inline contagion::TypeDistribution four_type() {
  contagion::TypeDistribution d;
  const std::vector<std::vector<double>> v{{8, 45, 5, 4}, {15, 20, 2, 3}, {0, 7, 0, 0}, {6, 1, 0, 0}};
  for (std::size_t a = 0; a < 4; ++a) {
    contagion::TypeVector t;
    t.u.assign(4, 0.0);
    t.u[a] = 1.0;
    t.v = v[a];
    d.atoms.push_back(t);
  }
  d.weights = {1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0};
  return d;
}

// External liabilities used by the bundled configs; Lambda = (7, 45, 6, 3).
inline std::vector<double> four_type_lambda_ext() { return {13.0, 39.0, 6.0, 3.0}; }

// Mean-field problem on the 4-type network with bimodal lognormal initial assets.
// Modes are given in distance units X = log(x0 / Lambda); sd is the log-sd of each mode.
inline contagion::MeanFieldProblem four_type_problem(const std::vector<std::vector<double>>& modes, double sd,
                                                     double R = 0.5, double rho = 0.97, double sigma = 0.2) {
  contagion::MeanFieldProblem p;
  p.dist = four_type();
  p.lambda_ext = four_type_lambda_ext();
  p.R = R;
  p.rho = rho;
  const auto L = contagion::mean_field_net_liability(p.dist, p.lambda_ext);
  for (std::size_t a = 0; a < 4; ++a) {
    p.mu.emplace_back(0.0);
    p.sigma.emplace_back(sigma);
    const auto& m = modes[modes.size() == 1 ? 0 : a];
    p.initial_assets.push_back(contagion::AssetDensity::lognormal_mixture(
        {0.3, 0.7}, {std::log(L[a]) + m[0], std::log(L[a]) + m[1]}, {sd, sd}));
  }
  return p;
}

inline contagion::MeanFieldProblem four_type_diffuse() { return four_type_problem({{1.0, 1.6}}, 0.35); }

inline contagion::MeanFieldProblem four_type_concentrated() {
  return four_type_problem({{0.1, 0.6}, {0.4, 0.9}, {0.6, 1.0}, {0.1, 0.6}}, 0.005);
}

}  // namespace fixture
