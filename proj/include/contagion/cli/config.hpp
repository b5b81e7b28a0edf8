#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "contagion/meanfield.hpp"
#include "contagion/network.hpp"
#include "contagion/paths.hpp"

namespace contagion::cli {

// Finite system drawn from the type distribution. Bank i of atom a gets
// lambda_ext = base_n * lambda_ext[a] and, when sampled, x0 = base_n * x(0),
// so Lambda^N_i is base_n times the mean-field Lambda of its atom.
struct BankSpec {
  std::size_t N = 0;
  std::size_t base_n = 0;
  bool stratified = true;
};

struct FitSpec {
  Eigen::MatrixXd matrix;
  std::size_t k = 1;
  std::size_t max_iter = 20000;
  std::size_t restarts = 8;
};

struct ScenarioConfig {
  // network
  std::size_t k = 0;
  TypeDistribution dist;
  std::vector<double> lambda_ext;  // per type
  RepaymentSchedule schedule = RepaymentSchedule::linear(1.0);

  // market, per type
  std::vector<TimeFunction> mu;
  std::vector<TimeFunction> sigma;
  std::vector<double> x0;  // empty when initial assets are sampled
  std::vector<AssetDensity> initial_assets;
  double rho = 0.0;
  double R = 0.5;

  // run
  std::optional<BankSpec> banks;
  std::optional<FitSpec> fit;
  std::size_t grid_steps = 500;
  std::size_t paths = 1;
  std::size_t particles = 10000;
  std::uint64_t seed = 1;
  std::uint64_t b0_seed = 1;
  std::size_t hist_bins = 40;
  double hist_max = 3.0;
  std::size_t hist_every = 5;
  std::string mode = "cash";
  std::string clearing = "greatest";

  double horizon() const { return schedule.horizon(); }
  TimeGrid grid() const { return TimeGrid::uniform(horizon(), grid_steps); }
  MeanFieldProblem mean_field_problem() const;
};

// Throws ParseError (with line) for malformed JSON or wrong value types and
// ValidationError (naming the field) for out-of-range values.
ScenarioConfig parse_config(const std::string& path);
ScenarioConfig parse_config_text(const std::string& text);

struct FiniteSystem {
  LiabilityNetwork net;
  MarketModel model;
  std::vector<double> x0;
  std::vector<std::size_t> atom;  // type index of each bank
};

FiniteSystem build_finite_system(const ScenarioConfig& cfg, std::uint64_t seed);

}  // namespace contagion::cli
