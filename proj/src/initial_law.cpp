#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "contagion/error.hpp"
#include "contagion/meanfield.hpp"
#include "contagion/rng.hpp"

namespace contagion {

AssetDensity AssetDensity::lognormal_mixture(std::vector<double> weights,
                                             std::vector<double> log_means,
                                             std::vector<double> log_sds) {
  if (weights.empty() || weights.size() != log_means.size() || weights.size() != log_sds.size())
    throw DimensionMismatch("lognormal mixture needs matching weights, log_means, log_sds");
  double total = 0.0;
  for (std::size_t c = 0; c < weights.size(); ++c) {
    if (weights[c] < 0.0) throw std::invalid_argument("mixture weights must be nonnegative");
    if (!(log_sds[c] > 0.0)) throw std::invalid_argument("mixture log_sds must be positive");
    total += weights[c];
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("mixture weights must sum to 1");
  AssetDensity d;
  d.w_ = std::move(weights);
  d.m_ = std::move(log_means);
  d.s_ = std::move(log_sds);
  return d;
}

AssetDensity AssetDensity::uniform(double a, double b) {
  if (!(a > 0.0 && b > a)) throw std::invalid_argument("uniform asset density needs 0 < a < b");
  AssetDensity d;
  d.uniform_ = true;
  d.a_ = a;
  d.b_ = b;
  return d;
}

double AssetDensity::pdf(double x) const {
  if (!(x > 0.0)) return 0.0;
  if (uniform_) return (x >= a_ && x <= b_) ? 1.0 / (b_ - a_) : 0.0;
  const double lx = std::log(x);
  double s = 0.0;
  for (std::size_t c = 0; c < w_.size(); ++c) {
    const double z = (lx - m_[c]) / s_[c];
    s += w_[c] * std::exp(-0.5 * z * z) / (s_[c] * std::sqrt(2.0 * std::numbers::pi));
  }
  return s / x;
}

double AssetDensity::sample(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) const {
  if (uniform_) return a_ + (b_ - a_) * rng::uniform(seed, 2 * stream, counter);
  const double u = rng::uniform(seed, 2 * stream, counter);
  std::size_t c = 0;
  double acc = w_[0];
  while (u > acc && c + 1 < w_.size()) acc += w_[++c];
  return std::exp(m_[c] + s_[c] * rng::normal(seed, 2 * stream + 1, counter));
}

InitialLaw::InitialLaw(std::vector<AssetDensity> assets, std::vector<double> shifts)
    : assets_(std::move(assets)), shifts_(std::move(shifts)) {
  if (assets_.size() != shifts_.size()) throw DimensionMismatch("one shift per asset density");
}

double InitialLaw::density(std::size_t type, double X) const {
  const auto& a = assets_[type];
  const double y = X + shifts_[type];
  if (a.is_uniform()) {
    const double x = std::exp(y);
    return (x >= a.lower() && x <= a.upper()) ? x / (a.upper() - a.lower()) : 0.0;
  }
  double s = 0.0;
  for (std::size_t c = 0; c < a.weights().size(); ++c) {
    const double z = (y - a.log_means()[c]) / a.log_sds()[c];
    s += a.weights()[c] * std::exp(-0.5 * z * z) / (a.log_sds()[c] * std::sqrt(2.0 * std::numbers::pi));
  }
  return s;
}

double InitialLaw::sample(std::size_t type, std::uint64_t seed, std::uint64_t counter) const {
  return std::log(assets_[type].sample(seed, type, counter)) - shifts_[type];
}

double InitialLaw::asset_from_distance(std::size_t type, double X) const {
  return std::exp(X + shifts_[type]);
}

std::pair<double, double> InitialLaw::support(std::size_t type) const {
  const auto& a = assets_[type];
  if (a.is_uniform())
    return {std::log(a.lower()) - shifts_[type], std::log(a.upper()) - shifts_[type]};
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t c = 0; c < a.weights().size(); ++c) {
    lo = std::min(lo, a.log_means()[c] - shifts_[type] - 9.0 * a.log_sds()[c]);
    hi = std::max(hi, a.log_means()[c] - shifts_[type] + 9.0 * a.log_sds()[c]);
  }
  return {lo, hi};
}

double InitialLaw::sup_norm(std::size_t type) const {
  const auto& a = assets_[type];
  if (a.is_uniform()) return a.upper() / (a.upper() - a.lower());
  const auto [lo, hi] = support(type);
  const std::size_t N = 20000;
  const double h = (hi - lo) / static_cast<double>(N);
  std::size_t best = 0;
  double best_v = -1.0;
  for (std::size_t j = 0; j <= N; ++j) {
    const double v = density(type, lo + h * static_cast<double>(j));
    if (v > best_v) best_v = v, best = j;
  }
  // Golden-section refinement on the bracketing cells.
  double x0 = lo + h * (static_cast<double>(best) - 1.0);
  double x3 = lo + h * (static_cast<double>(best) + 1.0);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = x3 - g * (x3 - x0), x2 = x0 + g * (x3 - x0);
  double f1 = density(type, x1), f2 = density(type, x2);
  for (int it = 0; it < 80; ++it) {
    if (f1 > f2) {
      x3 = x2, x2 = x1, f2 = f1;
      x1 = x3 - g * (x3 - x0);
      f1 = density(type, x1);
    } else {
      x0 = x1, x1 = x2, f1 = f2;
      x2 = x0 + g * (x3 - x0);
      f2 = density(type, x2);
    }
  }
  return std::max({best_v, f1, f2});
}

InitialLaw initial_law_from_assets(std::vector<AssetDensity> assets, std::span<const double> Lambda,
                                   double psi0, std::span<const double> drift_integral) {
  if (assets.size() != Lambda.size() || assets.size() != drift_integral.size())
    throw DimensionMismatch("one asset density, Lambda and drift integral per type");
  if (!(psi0 > 0.0)) throw std::invalid_argument("psi(T, 0) must be positive");
  std::vector<double> shifts(assets.size());
  for (std::size_t t = 0; t < assets.size(); ++t) {
    if (!(Lambda[t] > 0.0)) throw NonPositiveNetLiability(t, Lambda[t]);
    shifts[t] = std::log(psi0 * Lambda[t]) - drift_integral[t];
  }
  return InitialLaw(std::move(assets), std::move(shifts));
}

std::vector<double> mean_field_net_liability(const TypeDistribution& dist,
                                             std::span<const double> lambda_ext) {
  dist.validate();
  if (lambda_ext.size() != dist.size()) throw DimensionMismatch("lambda_ext must be given per atom");
  const auto Eu = dist.mean_u();
  const auto Ev = dist.mean_v();
  std::vector<double> L(dist.size());
  for (std::size_t a = 0; a < dist.size(); ++a)
    L[a] = lambda_ext[a] + dot(dist.atoms[a].u, Ev) - dot(dist.atoms[a].v, Eu);
  return L;
}

ContinuityReport check_continuity(const TypeDistribution& dist, const InitialLaw& init, double R,
                                  std::span<const double> Lambda) {
  dist.validate();
  if (init.types() != dist.size() || Lambda.size() != dist.size())
    throw DimensionMismatch("initial law and Lambda must be given per atom");
  if (!(R >= 0.0 && R <= 1.0)) throw InvalidRecoveryRate("recovery rate must lie in [0, 1]");
  ContinuityReport rep;
  for (std::size_t a = 0; a < dist.size(); ++a) {
    ContinuityEntry e;
    for (std::size_t b = 0; b < dist.size(); ++b) {
      if (dist.weights[b] <= 0.0) continue;
      const double x = dot(dist.atoms[a].u, dist.atoms[b].v);
      if (x > 0.0) e.exposure_max = std::max(e.exposure_max, x);
    }
    e.bound = (e.exposure_max == 0.0 || R == 1.0)
                  ? std::numeric_limits<double>::infinity()
                  : Lambda[a] / ((1.0 - R) * e.exposure_max);
    e.sup_norm = init.sup_norm(a);
    e.density_at_zero = init.density(a, 0.0);
    e.slack = e.bound - e.sup_norm;
    e.pass = e.sup_norm < e.bound;
    rep.pass = rep.pass && e.pass;
    rep.types.push_back(e);
  }
  return rep;
}

}  // namespace contagion
