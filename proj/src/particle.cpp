#include "contagion/particle.hpp"

#include <algorithm>
#include <cmath>

#include "contagion/error.hpp"

namespace contagion {

std::vector<double> to_distance(std::span<const double> K, std::span<const double> x_expect) {
  if (K.size() != x_expect.size()) throw DimensionMismatch("K and x_expect differ in length");
  std::vector<double> X(K.size());
  for (std::size_t i = 0; i < K.size(); ++i) {
    if (!(K[i] < x_expect[i]))
      throw CapitalExceedsAssets("capital of bank " + std::to_string(i) +
                                 " is not below its expected external assets");
    X[i] = -std::log1p(-K[i] / x_expect[i]);
  }
  return X;
}

std::vector<double> initial_distance(const LiabilityNetwork& net, const MarketModel& model,
                                     std::span<const double> x0) {
  if (model.size() != net.size() || x0.size() != net.size())
    throw DimensionMismatch("model, x0 and network sizes differ");
  const double psi0 = net.schedule().initial();
  const double T = net.schedule().horizon();
  std::vector<double> X(net.size());
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (!(x0[i] > 0.0)) throw NonPositiveInitialAsset("x0 must be positive");
    const double L = net.net_liability(i);
    if (!(L > 0.0)) throw NonPositiveNetLiability(i, L);
    X[i] = std::log(x0[i] / (psi0 * L)) + integrated_drift(model.mu[i], 0.0, T);
  }
  return X;
}

double ParticleState::loss_at(std::span<const double> v, std::size_t m) const {
  double s = 0.0;
  for (std::size_t l = 0; l < v.size(); ++l)
    s += v[l] * S(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(m));
  return s;
}

double ParticleState::contagion(const LiabilityNetwork& net, std::size_t l, std::size_t i,
                                std::size_t m) const {
  double s = S(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(m));
  if (solvency.tau[i] <= times[m]) s -= net.type(i).u[l];
  return s;
}

namespace {

double scaled_exposure(const LiabilityNetwork& net, double R, std::size_t i, double a) {
  return (1.0 - R) * net.scale() * a / (net.schedule().initial() * net.net_liability(i));
}

double loss_feedback(const LiabilityNetwork& net, double R, std::span<const double> H,
                     std::size_t i, double tau_i, bool defaulted) {
  const auto& ti = net.type(i);
  double a = dot(ti.v, H);
  if (defaulted) a -= net.schedule()(tau_i) * dot(ti.u, ti.v);
  return std::log1p(scaled_exposure(net, R, i, a));
}

}  // namespace

double particle_threshold(const LiabilityNetwork& net, double R, double t,
                          std::span<const double> H, double F_i, std::size_t i, double f) {
  const double a = dot(net.type(i).v, H) + net.schedule()(t) * f;
  return std::log1p(scaled_exposure(net, R, i, a)) - F_i;
}

ParticleCascade resolve_cascade_particle(double t, std::span<const double> X_pre,
                                         const ParticleState& state, const LiabilityNetwork& net,
                                         double R) {
  validate_recovery(R);
  const std::size_t n = net.size();
  const std::size_t k = net.factors();
  ParticleCascade out;
  out.delta.assign(k, 0.0);
  std::vector<char> in(n, 0);
  for (;;) {
    std::vector<char> next(n, 0);
    std::vector<double> delta(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (!state.solvency.solvent(i)) continue;
      const auto& ti = net.type(i);
      double f = 0.0;
      for (std::size_t l = 0; l < k; ++l)
        f += ti.v[l] * (out.delta[l] - (in[i] ? ti.u[l] : 0.0));
      if (X_pre[i] <= particle_threshold(net, R, t, state.H, state.F_now[i], i, f)) {
        next[i] = 1;
        for (std::size_t l = 0; l < k; ++l) delta[l] += ti.u[l];
      }
    }
    if (next == in) break;
    in = std::move(next);
    out.delta = std::move(delta);
    out.iterates.push_back(out.delta);
    std::vector<std::size_t> wave;
    for (std::size_t i = 0; i < n; ++i)
      if (in[i]) wave.push_back(i);
    out.waves.push_back(std::move(wave));
  }
  if (!out.waves.empty()) out.defaults = out.waves.back();
  return out;
}

namespace {

class ParticleSweep {
 public:
  ParticleSweep(const PathBundle& paths, const LiabilityNetwork& net, double R)
      : paths_(paths), net_(net), R_(R), n_(net.size()), k_(net.factors()) {
    st_.solvency = SolvencyState(n_);
    st_.H.assign(k_, 0.0);
    st_.F_now.assign(n_, 0.0);
    S_.assign(k_, 0.0);
    log_base_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i)
      log_base_[i] = std::log(net.schedule().initial() * net.net_liability(i));
  }

  ParticleState run() {
    const auto& grid = paths_.grid;
    const std::size_t M = grid.steps();
    const double tol = kEventTolerance * grid.horizon();
    const auto P = static_cast<Eigen::Index>(M + 1);
    st_.X.resize(static_cast<Eigen::Index>(n_), P);
    st_.F.resize(static_cast<Eigen::Index>(n_), P);
    st_.S.resize(static_cast<Eigen::Index>(k_), P);
    st_.times.assign(grid.times().begin(), grid.times().end());

    std::vector<double> X(n_);
    distance(0, 0.0, X);
    if (any_alive_at_or_below_zero(X)) apply_event(0.0, X);
    store(0);

    for (std::size_t m = 0; m < M; ++m) {
      double lo = 0.0;
      for (;;) {
        distance(m, 1.0, X);
        std::vector<std::size_t> cand;
        for (std::size_t i = 0; i < n_; ++i)
          if (st_.solvency.solvent(i) && X[i] <= 0.0) cand.push_back(i);
        if (cand.empty()) break;
        double hi = 1.0;
        while ((hi - lo) * grid.dt(m) > tol) {
          const double mid = 0.5 * (lo + hi);
          double g = INFINITY;
          for (auto i : cand)
            g = std::min(g, paths_.log_xe_at(i, m, mid) - log_base_[i] - st_.F_now[i]);
          if (g <= 0.0) hi = mid;
          else lo = mid;
        }
        distance(m, hi, X);
        const double te = hi == 1.0 ? grid[m + 1] : grid.at(m, hi);
        apply_event(te, X);
        lo = hi;
        if (hi == 1.0) break;
      }
      store(m + 1);
    }
    return std::move(st_);
  }

 private:
  void distance(std::size_t m, double theta, std::vector<double>& X) const {
    for (std::size_t i = 0; i < n_; ++i)
      X[i] = paths_.log_xe_at(i, m, theta) - log_base_[i] - st_.F_now[i];
  }

  bool any_alive_at_or_below_zero(const std::vector<double>& X) const {
    for (std::size_t i = 0; i < n_; ++i)
      if (st_.solvency.solvent(i) && X[i] <= 0.0) return true;
    return false;
  }

  void apply_event(double t, const std::vector<double>& X_pre) {
    auto c = resolve_cascade_particle(t, X_pre, st_, net_, R_);
    if (c.defaults.empty()) return;
    const double w = net_.schedule()(t);
    for (auto j : c.defaults) {
      st_.solvency.tau[j] = t;
      for (std::size_t l = 0; l < k_; ++l) st_.H[l] += w * net_.type(j).u[l];
    }
    for (std::size_t l = 0; l < k_; ++l) S_[l] += c.delta[l];
    for (std::size_t i = 0; i < n_; ++i)
      st_.F_now[i] = loss_feedback(net_, R_, st_.H, i, st_.solvency.tau[i], !st_.solvency.solvent(i));
    st_.jumps.push_back(c.delta);
    st_.solvency.events.push_back({t, std::move(c.waves)});
  }

  void store(std::size_t m) {
    const auto c = static_cast<Eigen::Index>(m);
    for (std::size_t i = 0; i < n_; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      st_.X(r, c) = paths_.log_xe(r, c) - log_base_[i] - st_.F_now[i];
      st_.F(r, c) = st_.F_now[i];
    }
    for (std::size_t l = 0; l < k_; ++l) st_.S(static_cast<Eigen::Index>(l), c) = S_[l];
  }

  const PathBundle& paths_;
  const LiabilityNetwork& net_;
  double R_;
  std::size_t n_, k_;
  ParticleState st_;
  std::vector<double> S_;
  std::vector<double> log_base_;
};

}  // namespace

ParticleState simulate_particle_system(const PathBundle& paths, const LiabilityNetwork& net,
                                       double R) {
  validate_recovery(R);
  if (paths.size() != net.size()) throw DimensionMismatch("path bundle and network sizes differ");
  return ParticleSweep(paths, net, R).run();
}

EquivalenceReport compare_formulations(const PathBundle& paths, const LiabilityNetwork& net,
                                       double R) {
  const auto clearing = greatest_clearing(paths, net, R);
  const auto particle = simulate_particle_system(paths, net, R);
  EquivalenceReport rep;
  const auto& ce = clearing.state.events;
  const auto& pe = particle.solvency.events;
  rep.events = ce.size();
  if (ce.size() != pe.size()) rep.default_sets_match = false;
  for (std::size_t e = 0; e < std::min(ce.size(), pe.size()); ++e) {
    if (ce[e].defaults() != pe[e].defaults()) rep.default_sets_match = false;
    rep.max_event_time_gap = std::max(rep.max_event_time_gap, std::abs(ce[e].time - pe[e].time));
  }
  const std::size_t n = net.size();
  std::vector<double> K(n), xe(n);
  for (std::size_t m = 0; m < paths.grid.points(); ++m) {
    for (std::size_t i = 0; i < n; ++i) {
      K[i] = clearing.K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m));
      xe[i] = paths.x_expect(i, m);
    }
    const auto X = to_distance(K, xe);
    for (std::size_t i = 0; i < n; ++i)
      rep.max_distance_gap =
          std::max(rep.max_distance_gap,
                   std::abs(X[i] - particle.X(static_cast<Eigen::Index>(i),
                                              static_cast<Eigen::Index>(m))));
  }
  return rep;
}

}  // namespace contagion
