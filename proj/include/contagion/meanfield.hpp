#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "contagion/network.hpp"
#include "contagion/paths.hpp"

namespace contagion {

// ---- initial laws ---------------------------------------------------------

// Density of the initial external asset value x(0) on (0, inf).
class AssetDensity {
 public:
  static AssetDensity lognormal_mixture(std::vector<double> weights, std::vector<double> log_means,
                                        std::vector<double> log_sds);
  static AssetDensity uniform(double a, double b);

  double pdf(double x) const;
  // Draw from the counter-based stream (seed, stream, counter).
  double sample(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) const;
  bool is_uniform() const noexcept { return uniform_; }
  const std::vector<double>& weights() const noexcept { return w_; }
  const std::vector<double>& log_means() const noexcept { return m_; }
  const std::vector<double>& log_sds() const noexcept { return s_; }
  double lower() const noexcept { return a_; }
  double upper() const noexcept { return b_; }

 private:
  bool uniform_ = false;
  std::vector<double> w_, m_, s_;
  double a_ = 0.0, b_ = 0.0;
};

// Law of X(0) per type: X = log x(0) - shift, shift = log(psi(0) Lambda) - integral of mu.
class InitialLaw {
 public:
  InitialLaw() = default;
  InitialLaw(std::vector<AssetDensity> assets, std::vector<double> shifts);

  std::size_t types() const noexcept { return assets_.size(); }
  double density(std::size_t type, double X) const;
  double sample(std::size_t type, std::uint64_t seed, std::uint64_t counter) const;
  // Asset value x(0) corresponding to a distance X for the given type.
  double asset_from_distance(std::size_t type, double X) const;
  // Supremum of the density, from a fine grid refined by golden-section search.
  double sup_norm(std::size_t type) const;
  // Interval outside which the density is negligible.
  std::pair<double, double> support(std::size_t type) const;
  double shift(std::size_t type) const { return shifts_[type]; }
  const AssetDensity& asset(std::size_t type) const { return assets_[type]; }

 private:
  std::vector<AssetDensity> assets_;
  std::vector<double> shifts_;
};

InitialLaw initial_law_from_assets(std::vector<AssetDensity> assets, std::span<const double> Lambda,
                                   double psi0, std::span<const double> drift_integral);

// Lambda_{u,v} = lambda_ext + u . E[v] - v . E[u] for each atom (owed minus owing).
std::vector<double> mean_field_net_liability(const TypeDistribution& dist,
                                             std::span<const double> lambda_ext);

struct ContinuityEntry {
  double exposure_max = 0.0;  // max{u . v_hat > 0 : v_hat in S(v)}, 0 if the set is empty
  double bound = 0.0;         // Lambda / ((1 - R) exposure_max), +inf if unbounded
  double sup_norm = 0.0;
  double density_at_zero = 0.0;
  double slack = 0.0;  // bound - sup_norm
  bool pass = false;
};

struct ContinuityReport {
  std::vector<ContinuityEntry> types;
  bool pass = true;
};

ContinuityReport check_continuity(const TypeDistribution& dist, const InitialLaw& init, double R,
                                  std::span<const double> Lambda);

// ---- mean-field solver ----------------------------------------------------

struct MeanFieldProblem {
  TypeDistribution dist;
  std::vector<double> lambda_ext;  // per atom
  RepaymentSchedule schedule = RepaymentSchedule::linear(1.0);
  std::vector<TimeFunction> mu;     // per atom
  std::vector<TimeFunction> sigma;  // per atom
  double rho = 0.0;
  double R = 0.5;
  std::vector<AssetDensity> initial_assets;  // per atom

  void validate() const;
  std::vector<double> net_liability() const;
  std::vector<double> drift_integrals() const;
  InitialLaw initial_law() const;
};

struct JumpOptions {
  std::vector<double> eps_schedule{1e-2, 1e-3, 1e-4};  // relative to max_v v . E[u]
  std::size_t m_max = 200;
  double accept_tol = 1e-6;
  std::size_t max_refinements = 12;
};

// Alive particles that a jump could reach at one step, sorted per type, plus
// everything needed to evaluate Theta and Xi.
struct JumpContext {
  double time = 0.0;
  double psi_ratio = 1.0;  // psi(t) / psi(0)
  double R = 0.5;
  std::size_t k = 0;
  std::vector<const TypeVector*> atom;
  std::vector<double> weight;
  std::vector<std::size_t> count;    // particles per type
  std::vector<double> Lambda;
  std::vector<double> history;       // v . G accumulated loss term per type
  std::vector<double> F;             // F per type at t-
  std::vector<std::vector<double>> X;  // sorted candidate positions per type

  double theta(std::size_t type, double f) const;
  // Per-type counts of candidates with X <= Theta(eps + v . delta).
  std::vector<std::size_t> hits(std::span<const double> delta, double eps) const;
  std::vector<double> mass(std::span<const std::size_t> hits) const;
  double scale() const;  // max_v v . E[u]
};

struct JumpResolution {
  std::vector<double> delta;         // Delta L as k components
  std::vector<std::size_t> hits;     // per-type particles inside the windows
  double eps = 0.0;                  // last epsilon used (0 when the exact iteration was used)
  std::size_t iterations = 0;
  bool stabilized = true;
  std::vector<std::vector<std::vector<double>>> iterates;  // per epsilon, per round
};

JumpResolution resolve_jump_mean_field(const JumpContext& ctx, const JumpOptions& options = {});

// max over atoms v of |v . delta - Xi(delta, v)|.
double jump_constraint_residual(const JumpContext& ctx, std::span<const double> delta);

struct JumpRecord {
  double time = 0.0;
  std::size_t step = 0;
  std::vector<double> delta;  // loss increment at this step
  double max_increment = 0.0;  // max_v v . delta
  double diffusive = 0.0;      // part of max_v v . delta present before any feedback (f = 0)
  double residual = 0.0;
  bool stabilized = true;
  double eps = 0.0;
};

struct DensitySnapshot {
  double time = 0.0;
  std::vector<std::vector<double>> mass;  // per type, per bin
};

struct MeanFieldOptions {
  std::size_t particles = 10000;
  std::uint64_t seed = 1;
  bool stratified = true;
  bool parallel = true;
  std::size_t hist_bins = 0;      // 0 disables density snapshots
  double hist_max = 3.0;
  std::size_t hist_every = 5;     // snapshot stride in steps
  JumpOptions jump;
};

struct MeanFieldState {
  TimeGrid grid;
  Eigen::MatrixXd losses;        // k x grid points: script L_l(t)
  Eigen::MatrixXd cond_default;  // types x grid points
  Eigen::MatrixXd alive_fraction;
  Eigen::MatrixXd F;             // types x grid points
  std::vector<double> step_increment;  // per step: max_v v . (change of script L)
  std::vector<JumpRecord> jumps;
  std::vector<DensitySnapshot> density;
  std::vector<double> hist_edges;
  std::vector<std::size_t> type_counts;
  std::vector<std::string> warnings;

  // Particle cloud at T.
  std::vector<std::uint32_t> type;
  std::vector<double> X;
  std::vector<double> tau;

  double largest_step_increment() const;
  double loss_at(std::span<const double> v, std::size_t m) const;
};

// Lambda for the mean-field problem must be positive for every atom.
MeanFieldState solve_mean_field(const MeanFieldProblem& problem, std::span<const double> B0,
                                const TimeGrid& grid, const MeanFieldOptions& options);

// Kernels: advance alive particles by one step. The OpenMP and serial versions
// produce bit-identical results for any thread count.
struct StepCoefficients {
  std::vector<double> drift;  // -1/2 integral of sigma^2, per type
  std::vector<double> vol;    // sqrt(integral of sigma^2 / dt), per type
  double idio = 1.0;          // sqrt(1 - rho^2)
  double common = 0.0;        // rho * (B0(t+) - B0(t))
  double sqrt_dt = 1.0;
};

void advance_particles(std::span<double> X, std::span<char> alive,
                       std::span<const std::uint32_t> type, const StepCoefficients& c,
                       std::uint64_t seed, std::uint64_t step);
void advance_particles_serial(std::span<double> X, std::span<char> alive,
                              std::span<const std::uint32_t> type, const StepCoefficients& c,
                              std::uint64_t seed, std::uint64_t step);

}  // namespace contagion
