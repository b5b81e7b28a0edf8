#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "contagion/tabulated.hpp"

namespace contagion {

class TimeGrid {
 public:
  static TimeGrid uniform(double horizon, std::size_t steps);
  static TimeGrid from_times(std::vector<double> times);

  std::size_t points() const noexcept { return t_.size(); }
  std::size_t steps() const noexcept { return t_.size() - 1; }
  double horizon() const noexcept { return t_.back(); }
  double operator[](std::size_t m) const { return t_[m]; }
  double dt(std::size_t m) const { return t_[m + 1] - t_[m]; }
  double at(std::size_t m, double theta) const { return t_[m] + theta * (t_[m + 1] - t_[m]); }
  std::span<const double> times() const noexcept { return t_; }
  // Step m and fraction theta in [0, 1] with t = at(m, theta); t is clamped to [0, T].
  std::pair<std::size_t, double> locate(double t) const;

 private:
  std::vector<double> t_;
};

// Deterministic scalar function of time: constant, tabulated, or arbitrary.
class TimeFunction {
 public:
  TimeFunction(double c = 0.0) : constant_(c) {}  // NOLINT: implicit from scalar is intended
  explicit TimeFunction(Tabulated table);
  explicit TimeFunction(std::function<double(double)> f);

  double operator()(double t) const;
  bool is_constant() const noexcept { return !f_; }
  // Integral over [a, b]: exact for constants, composite Simpson otherwise.
  double integral(double a, double b, std::size_t panels = 2) const;

 private:
  double constant_ = 0.0;
  std::function<double(double)> f_;
};

// Drivers dx_i = x_i (mu_i dt + sigma_i dW_i), W_i = sqrt(1 - rho^2) B_i + rho B_0.
struct MarketModel {
  std::vector<TimeFunction> mu;
  std::vector<TimeFunction> sigma;
  double rho = 0.0;

  std::size_t size() const noexcept { return mu.size(); }
  void validate() const;
};

// Integral of mu over [t, T] by composite Simpson (exact for constant and linear mu).
double integrated_drift(const TimeFunction& mu, double t, double T, std::size_t panels = 64);

// Integral of sigma^2 over [a, b] (Simpson on one panel unless sigma is constant).
double integrated_variance(const TimeFunction& sigma, double a, double b);

// Brownian drivers and external asset paths on a shared grid. Bank rows, time columns.
struct PathBundle {
  TimeGrid grid;
  std::vector<double> B0;
  Eigen::MatrixXd B;
  Eigen::MatrixXd log_x;
  Eigen::MatrixXd log_xe;      // log E[x_i(T) | F_t]
  Eigen::MatrixXd drift_tail;  // integral of mu_i over [t_m, T]
  double rho = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return static_cast<std::size_t>(log_x.rows()); }
  std::size_t steps() const noexcept { return grid.steps(); }
  double x(std::size_t i, std::size_t m) const;
  double x_expect(std::size_t i, std::size_t m) const;

  // Within a step the log-values are interpolated linearly in time.
  double log_x_at(std::size_t i, std::size_t m, double theta) const {
    const auto r = static_cast<Eigen::Index>(i);
    const auto c = static_cast<Eigen::Index>(m);
    return (1.0 - theta) * log_x(r, c) + theta * log_x(r, c + 1);
  }
  double log_xe_at(std::size_t i, std::size_t m, double theta) const {
    const auto r = static_cast<Eigen::Index>(i);
    const auto c = static_cast<Eigen::Index>(m);
    return (1.0 - theta) * log_xe(r, c) + theta * log_xe(r, c + 1);
  }
  double log_xe_at_time(std::size_t i, double t) const;
};

// Standard Brownian path on the grid from counter-based normals (seed, stream).
std::vector<double> brownian_path(const TimeGrid& grid, std::uint64_t seed, std::uint64_t stream);

// Exact log-space stepping; B0 uses stream 0 and B_i stream i + 1 of seed.
PathBundle simulate_paths(const MarketModel& model, std::span<const double> x0, const TimeGrid& grid,
                          std::uint64_t seed);

// As simulate_paths but with a prescribed common path B0.
PathBundle simulate_paths(const MarketModel& model, std::span<const double> x0, const TimeGrid& grid,
                          std::uint64_t seed, std::span<const double> B0);

// Deterministic construction from given Brownian paths (B has one row per bank).
PathBundle paths_from_brownian(const MarketModel& model, std::span<const double> x0,
                               const TimeGrid& grid, std::span<const double> B0,
                               const Eigen::MatrixXd& B, std::uint64_t seed = 0);

// CSV with columns time, bank, B, x, x_expect; bank = -1 rows carry B0.
void write_paths_csv(const PathBundle& paths, const std::string& file);
PathBundle read_paths_csv(const std::string& file);

}  // namespace contagion
