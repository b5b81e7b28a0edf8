#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "contagion/tabulated.hpp"

namespace contagion {

// Borrowing (u) and lending (v) scores of one bank or one type.
struct TypeVector {
  std::vector<double> u;
  std::vector<double> v;

  std::size_t dim() const noexcept { return u.size(); }
  bool operator==(const TypeVector&) const = default;
};

double dot(std::span<const double> a, std::span<const double> b) noexcept;

// psi(T, t): the share of obligations still owed over [t, T].
class RepaymentSchedule {
 public:
  static RepaymentSchedule linear(double horizon);
  // Tabulated schedule, linearly interpolated. Must start at 0, end at the
  // horizon with value 0, be non-increasing and positive at 0.
  static RepaymentSchedule table(std::vector<double> times, std::vector<double> values);

  double horizon() const noexcept { return horizon_; }
  double operator()(double t) const;
  double initial() const { return (*this)(0.0); }
  bool is_linear() const noexcept { return linear_; }
  const Tabulated& tabulated() const noexcept { return table_; }

 private:
  RepaymentSchedule() = default;
  double horizon_ = 1.0;
  bool linear_ = true;
  Tabulated table_;
};

// Interbank relative liabilities lambda_ij = scale * u^i . v^j (i != j),
// external liabilities lambda_ext and the repayment schedule.
// Immutable; aggregate factor sums are cached so per-bank queries are O(k).
class LiabilityNetwork {
 public:
  std::size_t size() const noexcept { return types_.size(); }
  std::size_t factors() const noexcept { return k_; }
  double scale() const noexcept { return scale_; }
  const TypeVector& type(std::size_t i) const { return types_[i]; }
  const std::vector<TypeVector>& types() const noexcept { return types_; }
  double lambda_ext(std::size_t i) const { return lambda_ext_[i]; }
  std::span<const double> lambda_ext() const noexcept { return lambda_ext_; }
  const RepaymentSchedule& schedule() const noexcept { return schedule_; }

  double lambda(std::size_t i, std::size_t j) const;

  // Net liability Lambda_i, from the factor sums.
  double net_liability(std::size_t i) const { return net_liability_[i]; }
  std::span<const double> net_liabilities() const noexcept { return net_liability_; }
  // Same quantity by direct summation over counterparties; O(n).
  double net_liability_direct(std::size_t i) const;

  // Sum_j u^j and Sum_j v^j over all banks.
  std::span<const double> borrowing_total() const noexcept { return u_total_; }
  std::span<const double> lending_total() const noexcept { return v_total_; }

  // Sum over j in D, j != i, of lambda_ji, where borrowing_sum = Sum_{j in D} u^j.
  double incoming(std::size_t i, std::span<const double> borrowing_sum, bool i_in_set) const;

  Eigen::MatrixXd matrix() const;

  friend LiabilityNetwork build_low_rank(std::vector<TypeVector>, std::vector<double>,
                                         RepaymentSchedule);
  friend LiabilityNetwork scale_network(std::size_t, std::size_t, std::vector<TypeVector>,
                                        std::vector<double>, RepaymentSchedule);

 private:
  LiabilityNetwork(std::vector<TypeVector> types, std::vector<double> lambda_ext,
                   RepaymentSchedule schedule, double scale);

  std::size_t k_ = 0;
  double scale_ = 1.0;
  std::vector<TypeVector> types_;
  std::vector<double> lambda_ext_;
  RepaymentSchedule schedule_;
  std::vector<double> u_total_;
  std::vector<double> v_total_;
  std::vector<double> net_liability_;
};

// Throws DimensionMismatch, std::invalid_argument for negative scores,
// NonPositiveNetLiability when some Lambda_i <= 0.
LiabilityNetwork build_low_rank(std::vector<TypeVector> types, std::vector<double> lambda_ext,
                                RepaymentSchedule schedule);

// N-bank network from base_n-bank statistics: lambda^N_ij = (base_n / N) u^i . v^j.
// lambda_ext is per sampled bank and is not rescaled.
LiabilityNetwork scale_network(std::size_t base_n, std::size_t N, std::vector<TypeVector> samples,
                               std::vector<double> lambda_ext, RepaymentSchedule schedule);

// Discrete law of (u, v).
struct TypeDistribution {
  std::vector<TypeVector> atoms;
  std::vector<double> weights;

  std::size_t size() const noexcept { return atoms.size(); }
  std::size_t factors() const { return atoms.empty() ? 0 : atoms.front().dim(); }
  void validate() const;
  std::vector<double> mean_u() const;
  std::vector<double> mean_v() const;
};

struct SampledTypes {
  std::vector<TypeVector> types;
  std::vector<std::size_t> atoms;  // index into TypeDistribution::atoms
};

// N draws from dist. With stratified = true the atom counts are the
// largest-remainder rounding of N * weight, laid out atom by atom.
SampledTypes sample_types(const TypeDistribution& dist, std::size_t N, std::uint64_t seed,
                          bool stratified = false);

// ---- fitting --------------------------------------------------------------

struct FitOptions {
  std::size_t max_iter = 20000;
  double tol = 1e-14;
  std::size_t restarts = 8;
  std::uint64_t seed = 1;
};

struct LowRankFit {
  std::vector<TypeVector> types;
  double residual = 0.0;  // sum over i != j of (L_ij - u^i . v^j)^2
  std::size_t iterations = 0;
  bool converged = false;  // false plays the role of NotConverged; types hold the best iterate
  std::vector<double> history;  // residual after each sweep of the winning restart
};

LowRankFit fit_low_rank(const Eigen::MatrixXd& L, std::size_t k, const FitOptions& options = {});

double off_diagonal_residual(const Eigen::MatrixXd& L, std::span<const TypeVector> types);

}  // namespace contagion
