#include "contagion/paths.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>

#include "contagion/error.hpp"
#include "contagion/io.hpp"
#include "contagion/rng.hpp"

namespace contagion {

// ---- TimeGrid -------------------------------------------------------------

TimeGrid TimeGrid::uniform(double horizon, std::size_t steps) {
  if (!(horizon > 0.0)) throw std::invalid_argument("grid horizon must be positive");
  if (steps < 1) throw std::invalid_argument("grid needs at least one step");
  TimeGrid g;
  g.t_.resize(steps + 1);
  for (std::size_t m = 0; m <= steps; ++m)
    g.t_[m] = horizon * static_cast<double>(m) / static_cast<double>(steps);
  g.t_.back() = horizon;
  return g;
}

TimeGrid TimeGrid::from_times(std::vector<double> times) {
  if (times.size() < 2) throw std::invalid_argument("grid needs at least two points");
  if (times.front() != 0.0) throw std::invalid_argument("grid must start at 0");
  for (std::size_t m = 1; m < times.size(); ++m)
    if (!(times[m] > times[m - 1])) throw std::invalid_argument("grid must be strictly increasing");
  TimeGrid g;
  g.t_ = std::move(times);
  return g;
}

std::pair<std::size_t, double> TimeGrid::locate(double t) const {
  if (t <= t_.front()) return {0, 0.0};
  if (t >= t_.back()) return {steps() - 1, 1.0};
  const auto it = std::upper_bound(t_.begin(), t_.end(), t);
  const std::size_t m = static_cast<std::size_t>(it - t_.begin()) - 1;
  return {m, (t - t_[m]) / (t_[m + 1] - t_[m])};
}

// ---- TimeFunction ---------------------------------------------------------

TimeFunction::TimeFunction(Tabulated table)
    : f_([tab = std::move(table)](double t) { return tab(t); }) {}

TimeFunction::TimeFunction(std::function<double(double)> f) : f_(std::move(f)) {}

double TimeFunction::operator()(double t) const { return f_ ? f_(t) : constant_; }

double TimeFunction::integral(double a, double b, std::size_t panels) const {
  if (!f_) return constant_ * (b - a);
  if (b == a) return 0.0;
  const std::size_t n = std::max<std::size_t>(2, panels + (panels & 1));
  const double h = (b - a) / static_cast<double>(n);
  double s = f_(a) + f_(b);
  for (std::size_t j = 1; j < n; ++j) s += (j & 1 ? 4.0 : 2.0) * f_(a + h * static_cast<double>(j));
  return s * h / 3.0;
}

void MarketModel::validate() const {
  if (mu.size() != sigma.size()) throw DimensionMismatch("mu and sigma must have one entry per bank");
  if (!(rho >= -1.0 && rho <= 1.0)) throw InvalidCorrelation("rho must lie in [-1, 1]");
}

double integrated_drift(const TimeFunction& mu, double t, double T, std::size_t panels) {
  return mu.integral(t, T, panels);
}

double integrated_variance(const TimeFunction& sigma, double a, double b) {
  if (sigma.is_constant()) {
    const double s = sigma(a);
    return s * s * (b - a);
  }
  const double s0 = sigma(a), s1 = sigma(0.5 * (a + b)), s2 = sigma(b);
  return (s0 * s0 + 4.0 * s1 * s1 + s2 * s2) * (b - a) / 6.0;
}

// ---- PathBundle -----------------------------------------------------------

double PathBundle::x(std::size_t i, std::size_t m) const {
  return std::exp(log_x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)));
}

double PathBundle::x_expect(std::size_t i, std::size_t m) const {
  return std::exp(log_xe(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)));
}

double PathBundle::log_xe_at_time(std::size_t i, double t) const {
  const auto [m, theta] = grid.locate(t);
  return log_xe_at(i, m, theta);
}

std::vector<double> brownian_path(const TimeGrid& grid, std::uint64_t seed, std::uint64_t stream) {
  std::vector<double> b(grid.points(), 0.0);
  for (std::size_t m = 0; m < grid.steps(); ++m)
    b[m + 1] = b[m] + std::sqrt(grid.dt(m)) * rng::normal(seed, stream, m);
  return b;
}

PathBundle paths_from_brownian(const MarketModel& model, std::span<const double> x0,
                               const TimeGrid& grid, std::span<const double> B0,
                               const Eigen::MatrixXd& B, std::uint64_t seed) {
  model.validate();
  const std::size_t n = model.size();
  const std::size_t M = grid.steps();
  if (x0.size() != n) throw DimensionMismatch("x0 must have one entry per bank");
  if (B0.size() != grid.points()) throw DimensionMismatch("B0 must have one value per grid point");
  if (static_cast<std::size_t>(B.rows()) != n || static_cast<std::size_t>(B.cols()) != grid.points())
    throw DimensionMismatch("B must be banks x grid points");
  for (std::size_t i = 0; i < n; ++i)
    if (!(x0[i] > 0.0) || !std::isfinite(x0[i]))
      throw NonPositiveInitialAsset("x0 of bank " + std::to_string(i) + " must be positive");

  PathBundle p;
  p.grid = grid;
  p.B0.assign(B0.begin(), B0.end());
  p.B = B;
  p.rho = model.rho;
  p.seed = seed;
  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(M + 1);
  p.log_x.resize(rows, cols);
  p.log_xe.resize(rows, cols);
  p.drift_tail.resize(rows, cols);
  const double a = std::sqrt(std::max(0.0, 1.0 - model.rho * model.rho));

  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& mu = model.mu[static_cast<std::size_t>(i)];
    const auto& sigma = model.sigma[static_cast<std::size_t>(i)];
    p.drift_tail(i, cols - 1) = 0.0;
    for (std::size_t m = M; m-- > 0;)
      p.drift_tail(i, static_cast<Eigen::Index>(m)) =
          p.drift_tail(i, static_cast<Eigen::Index>(m + 1)) + mu.integral(grid[m], grid[m + 1]);
    p.log_xe(i, 0) = std::log(x0[static_cast<std::size_t>(i)]) + p.drift_tail(i, 0);
    for (std::size_t m = 0; m < M; ++m) {
      const auto c = static_cast<Eigen::Index>(m);
      const double var = integrated_variance(sigma, grid[m], grid[m + 1]);
      const double dt = grid.dt(m);
      const double dW = a * (B(i, c + 1) - B(i, c)) + model.rho * (B0[m + 1] - B0[m]);
      p.log_xe(i, c + 1) = p.log_xe(i, c) - 0.5 * var + std::sqrt(var / dt) * dW;
    }
    for (Eigen::Index c = 0; c < cols; ++c) p.log_x(i, c) = p.log_xe(i, c) - p.drift_tail(i, c);
  }
  return p;
}

PathBundle simulate_paths(const MarketModel& model, std::span<const double> x0, const TimeGrid& grid,
                          std::uint64_t seed, std::span<const double> B0) {
  const std::size_t n = model.size();
  Eigen::MatrixXd B(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(grid.points()));
  for (std::size_t i = 0; i < n; ++i) {
    const auto b = brownian_path(grid, seed, i + 1);
    for (std::size_t m = 0; m < b.size(); ++m)
      B(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) = b[m];
  }
  return paths_from_brownian(model, x0, grid, B0, B, seed);
}

PathBundle simulate_paths(const MarketModel& model, std::span<const double> x0, const TimeGrid& grid,
                          std::uint64_t seed) {
  const auto b0 = brownian_path(grid, seed, 0);
  return simulate_paths(model, x0, grid, seed, b0);
}

void write_paths_csv(const PathBundle& p, const std::string& file) {
  io::CsvWriter w(file, {"time", "bank", "B", "x", "x_expect"});
  const std::size_t n = p.size();
  for (std::size_t m = 0; m < p.grid.points(); ++m) {
    w.row(p.grid[m], -1, p.B0[m], 0.0, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      w.row(p.grid[m], static_cast<long long>(i),
            p.B(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)), p.x(i, m),
            p.x_expect(i, m));
  }
}

PathBundle read_paths_csv(const std::string& file) {
  const auto t = io::read_csv(file);
  const std::size_t ct = t.column("time"), cb = t.column("bank"), cB = t.column("B"),
                    cx = t.column("x"), ce = t.column("x_expect");
  std::vector<double> times;
  std::map<long long, std::vector<std::array<double, 3>>> rows;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto line = t.lines[r];
    const double time = io::parse_double(row[ct], line);
    const long long bank = io::parse_int(row[cb], line);
    if (bank < -1) throw ParseError("bank index must be >= -1", line);
    if (bank == -1) times.push_back(time);
    rows[bank].push_back({io::parse_double(row[cB], line), io::parse_double(row[cx], line),
                          io::parse_double(row[ce], line)});
  }
  if (!rows.count(-1)) throw ParseError(file + ": no common-noise rows (bank = -1)", 1);
  const std::size_t P = times.size();
  const std::size_t n = rows.size() - 1;
  PathBundle p;
  p.grid = TimeGrid::from_times(times);
  const auto rn = static_cast<Eigen::Index>(n), cn = static_cast<Eigen::Index>(P);
  p.B.resize(rn, cn);
  p.log_x.resize(rn, cn);
  p.log_xe.resize(rn, cn);
  p.drift_tail.resize(rn, cn);
  for (const auto& [bank, vals] : rows) {
    if (vals.size() != P) throw ParseError(file + ": ragged path for bank " + std::to_string(bank), 1);
    if (bank == -1) {
      for (const auto& v : vals) p.B0.push_back(v[0]);
      continue;
    }
    if (static_cast<std::size_t>(bank) >= n)
      throw ParseError(file + ": bank indices must be contiguous from 0", 1);
    const auto i = static_cast<Eigen::Index>(bank);
    for (std::size_t m = 0; m < P; ++m) {
      const auto c = static_cast<Eigen::Index>(m);
      p.B(i, c) = vals[m][0];
      p.log_x(i, c) = std::log(vals[m][1]);
      p.log_xe(i, c) = std::log(vals[m][2]);
      p.drift_tail(i, c) = p.log_xe(i, c) - p.log_x(i, c);
    }
  }
  return p;
}

}  // namespace contagion
