#include "contagion/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "contagion/error.hpp"
#include "contagion/rng.hpp"

namespace contagion {

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) s += a[l] * b[l];
  return s;
}

// ---- RepaymentSchedule ----------------------------------------------------

RepaymentSchedule RepaymentSchedule::linear(double horizon) {
  if (!(horizon > 0.0)) throw std::invalid_argument("schedule horizon must be positive");
  RepaymentSchedule s;
  s.horizon_ = horizon;
  s.linear_ = true;
  return s;
}

RepaymentSchedule RepaymentSchedule::table(std::vector<double> times, std::vector<double> values) {
  Tabulated tab(std::move(times), std::move(values));
  const auto ts = tab.times();
  const auto vs = tab.values();
  if (ts.front() != 0.0) throw std::invalid_argument("schedule table must start at t = 0");
  if (!(vs.front() > 0.0)) throw std::invalid_argument("psi(T, 0) must be positive");
  if (vs.back() != 0.0) throw std::invalid_argument("psi(T, T) must be 0");
  for (std::size_t i = 1; i < vs.size(); ++i)
    if (vs[i] > vs[i - 1]) throw std::invalid_argument("psi(T, .) must be non-increasing");
  RepaymentSchedule s;
  s.horizon_ = ts.back();
  s.linear_ = false;
  s.table_ = std::move(tab);
  return s;
}

double RepaymentSchedule::operator()(double t) const {
  if (linear_) return horizon_ - std::clamp(t, 0.0, horizon_);
  return table_(t);
}

// ---- LiabilityNetwork -----------------------------------------------------

LiabilityNetwork::LiabilityNetwork(std::vector<TypeVector> types, std::vector<double> lambda_ext,
                                   RepaymentSchedule schedule, double scale)
    : scale_(scale),
      types_(std::move(types)),
      lambda_ext_(std::move(lambda_ext)),
      schedule_(std::move(schedule)) {
  if (types_.empty()) throw DimensionMismatch("network needs at least one bank");
  if (lambda_ext_.size() != types_.size())
    throw DimensionMismatch("lambda_ext has " + std::to_string(lambda_ext_.size()) +
                            " entries for " + std::to_string(types_.size()) + " banks");
  k_ = types_.front().dim();
  if (k_ == 0) throw DimensionMismatch("factor dimension must be at least 1");
  u_total_.assign(k_, 0.0);
  v_total_.assign(k_, 0.0);
  for (std::size_t i = 0; i < types_.size(); ++i) {
    const auto& t = types_[i];
    if (t.u.size() != k_ || t.v.size() != k_)
      throw DimensionMismatch("bank " + std::to_string(i) + " has factor length != " +
                              std::to_string(k_));
    for (std::size_t l = 0; l < k_; ++l) {
      if (t.u[l] < 0.0 || t.v[l] < 0.0 || !std::isfinite(t.u[l]) || !std::isfinite(t.v[l]))
        throw std::invalid_argument("scores must be finite and nonnegative (bank " +
                                    std::to_string(i) + ")");
      u_total_[l] += t.u[l];
      v_total_[l] += t.v[l];
    }
    if (lambda_ext_[i] < 0.0) throw std::invalid_argument("lambda_ext must be nonnegative");
  }
  net_liability_.resize(types_.size());
  for (std::size_t i = 0; i < types_.size(); ++i) {
    // The self terms u^i.v^i - v^i.u^i cancel, so the sums may include j = i.
    const auto& t = types_[i];
    net_liability_[i] = lambda_ext_[i] + scale_ * (dot(t.u, v_total_) - dot(t.v, u_total_));
    if (!(net_liability_[i] > 0.0)) throw NonPositiveNetLiability(i, net_liability_[i]);
  }
}

double LiabilityNetwork::lambda(std::size_t i, std::size_t j) const {
  if (i == j) return 0.0;
  return scale_ * dot(types_[i].u, types_[j].v);
}

double LiabilityNetwork::net_liability_direct(std::size_t i) const {
  double s = lambda_ext_[i];
  for (std::size_t j = 0; j < types_.size(); ++j) s += lambda(i, j) - lambda(j, i);
  return s;
}

double LiabilityNetwork::incoming(std::size_t i, std::span<const double> borrowing_sum,
                                  bool i_in_set) const {
  const auto& t = types_[i];
  double s = 0.0;
  for (std::size_t l = 0; l < k_; ++l)
    s += t.v[l] * (borrowing_sum[l] - (i_in_set ? t.u[l] : 0.0));
  return scale_ * s;
}

Eigen::MatrixXd LiabilityNetwork::matrix() const {
  const auto n = static_cast<Eigen::Index>(size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      m(i, j) = lambda(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  return m;
}

LiabilityNetwork build_low_rank(std::vector<TypeVector> types, std::vector<double> lambda_ext,
                                RepaymentSchedule schedule) {
  return LiabilityNetwork(std::move(types), std::move(lambda_ext), std::move(schedule), 1.0);
}

LiabilityNetwork scale_network(std::size_t base_n, std::size_t N, std::vector<TypeVector> samples,
                               std::vector<double> lambda_ext, RepaymentSchedule schedule) {
  if (base_n == 0 || N < base_n) throw std::invalid_argument("scale_network needs N >= base_n >= 1");
  if (samples.size() != N)
    throw DimensionMismatch("expected " + std::to_string(N) + " samples, got " +
                            std::to_string(samples.size()));
  const double scale = static_cast<double>(base_n) / static_cast<double>(N);
  return LiabilityNetwork(std::move(samples), std::move(lambda_ext), std::move(schedule), scale);
}

// ---- TypeDistribution -----------------------------------------------------

void TypeDistribution::validate() const {
  if (atoms.empty()) throw std::invalid_argument("type distribution has no atoms");
  if (weights.size() != atoms.size()) throw DimensionMismatch("one weight per atom required");
  const std::size_t k = atoms.front().dim();
  double total = 0.0;
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    if (atoms[a].u.size() != k || atoms[a].v.size() != k)
      throw DimensionMismatch("atom " + std::to_string(a) + " has inconsistent factor length");
    for (std::size_t l = 0; l < k; ++l)
      if (atoms[a].u[l] < 0.0 || atoms[a].v[l] < 0.0)
        throw std::invalid_argument("atom scores must be nonnegative");
    if (weights[a] < 0.0) throw std::invalid_argument("atom weights must be nonnegative");
    total += weights[a];
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("atom weights must sum to 1");
}

std::vector<double> TypeDistribution::mean_u() const {
  std::vector<double> m(factors(), 0.0);
  for (std::size_t a = 0; a < atoms.size(); ++a)
    for (std::size_t l = 0; l < m.size(); ++l) m[l] += weights[a] * atoms[a].u[l];
  return m;
}

std::vector<double> TypeDistribution::mean_v() const {
  std::vector<double> m(factors(), 0.0);
  for (std::size_t a = 0; a < atoms.size(); ++a)
    for (std::size_t l = 0; l < m.size(); ++l) m[l] += weights[a] * atoms[a].v[l];
  return m;
}

SampledTypes sample_types(const TypeDistribution& dist, std::size_t N, std::uint64_t seed,
                          bool stratified) {
  dist.validate();
  if (N == 0) throw std::invalid_argument("sample_types needs N >= 1");
  SampledTypes out;
  out.types.reserve(N);
  out.atoms.reserve(N);
  const std::size_t A = dist.size();

  if (stratified) {
    std::vector<std::size_t> counts(A);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t a = 0; a < A; ++a) {
      const double exact = dist.weights[a] * static_cast<double>(N);
      counts[a] = static_cast<std::size_t>(std::floor(exact + 1e-9));
      assigned += counts[a];
      remainders.emplace_back(exact - static_cast<double>(counts[a]), a);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& x, const auto& y) { return x.first > y.first; });
    for (std::size_t r = 0; assigned < N; ++r, ++assigned) ++counts[remainders[r % A].second];
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t c = 0; c < counts[a]; ++c) {
        out.types.push_back(dist.atoms[a]);
        out.atoms.push_back(a);
      }
    return out;
  }

  std::vector<double> cdf(A);
  std::partial_sum(dist.weights.begin(), dist.weights.end(), cdf.begin());
  for (std::size_t i = 0; i < N; ++i) {
    const double x = rng::uniform(seed, 0, i) * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), x);
    std::size_t a = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), A - 1);
    while (dist.weights[a] == 0.0 && a + 1 < A) ++a;
    out.types.push_back(dist.atoms[a]);
    out.atoms.push_back(a);
  }
  return out;
}

}  // namespace contagion
