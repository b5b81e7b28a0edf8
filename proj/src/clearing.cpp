#include "contagion/clearing.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "contagion/error.hpp"

namespace contagion {

void validate_recovery(double R) {
  if (!(R >= 0.0 && R <= 1.0)) throw InvalidRecoveryRate("recovery rate must lie in [0, 1]");
}

namespace {

void check_sizes(const PathBundle& paths, const LiabilityNetwork& net) {
  if (paths.size() != net.size())
    throw DimensionMismatch("path bundle has " + std::to_string(paths.size()) +
                            " banks, network has " + std::to_string(net.size()));
}

// Sum over defaulted j of psi(tau_j) u^j.
std::vector<double> weighted_borrowing(const LiabilityNetwork& net, std::span<const double> tau,
                                       double t) {
  std::vector<double> H(net.factors(), 0.0);
  for (std::size_t j = 0; j < net.size(); ++j) {
    if (!(tau[j] <= t)) continue;
    const double w = net.schedule()(tau[j]);
    for (std::size_t l = 0; l < H.size(); ++l) H[l] += w * net.type(j).u[l];
  }
  return H;
}

// Liabilities side of the factorised capital: psi0 Lambda_i + (1 - R) C_i.
double liability_side(const LiabilityNetwork& net, double R, std::span<const double> H,
                      std::size_t i, double tau_i, bool defaulted) {
  const auto& ti = net.type(i);
  double c = dot(ti.v, H);
  if (defaulted) c -= net.schedule()(tau_i) * dot(ti.u, ti.v);
  return net.schedule().initial() * net.net_liability(i) + (1.0 - R) * net.scale() * c;
}

}  // namespace

std::vector<double> capital_given_solvency(double t, const PathBundle& paths,
                                           const LiabilityNetwork& net, double R,
                                           std::span<const double> tau) {
  validate_recovery(R);
  check_sizes(paths, net);
  if (tau.size() != net.size()) throw DimensionMismatch("tau must have one entry per bank");
  const auto H = weighted_borrowing(net, tau, t);
  std::vector<double> K(net.size());
  for (std::size_t i = 0; i < net.size(); ++i)
    K[i] = std::exp(paths.log_xe_at_time(i, t)) -
           liability_side(net, R, H, i, tau[i], tau[i] <= t);
  return K;
}

std::vector<double> capital_given_solvency_direct(double t, const PathBundle& paths,
                                                  const LiabilityNetwork& net, double R,
                                                  std::span<const double> tau) {
  validate_recovery(R);
  check_sizes(paths, net);
  if (tau.size() != net.size()) throw DimensionMismatch("tau must have one entry per bank");
  const std::size_t n = net.size();
  const double psi0 = net.schedule().initial();
  std::vector<double> K(n);
  for (std::size_t i = 0; i < n; ++i) {
    double k = std::exp(paths.log_xe_at_time(i, t)) - psi0 * net.lambda_ext(i);
    for (std::size_t j = 0; j < n; ++j) {
      const double lji = net.lambda(j, i);
      const double LT = psi0 * lji;
      if (tau[j] > t) {
        k += LT;
      } else {
        const double Ltau = (psi0 - net.schedule()(tau[j])) * lji;
        k += (1.0 - R) * Ltau + R * LT;
      }
      k -= psi0 * net.lambda(i, j);
    }
    K[i] = k;
  }
  return K;
}

double cascade_loss(const LiabilityNetwork& net, double R, double psi_t, std::size_t i,
                    std::span<const double> set_borrowing, bool i_in_set) {
  return (1.0 - R) * psi_t * net.incoming(i, set_borrowing, i_in_set);
}

CascadeResult resolve_cascade(double t, std::span<const double> K_pre, const SolvencyState& state,
                              const LiabilityNetwork& net, double R, ClearingKind kind,
                              std::span<const std::size_t> forced) {
  validate_recovery(R);
  const std::size_t n = net.size();
  const std::size_t k = net.factors();
  const double psi_t = net.schedule()(t);
  std::vector<char> is_forced(n, 0);
  for (auto f : forced) is_forced.at(f) = 1;

  auto collect = [n](const std::vector<char>& in) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i)
      if (in[i]) out.push_back(i);
    return out;
  };
  auto borrowing = [&](const std::vector<char>& in) {
    std::vector<double> S(k, 0.0);
    for (std::size_t j = 0; j < n; ++j)
      if (in[j])
        for (std::size_t l = 0; l < k; ++l) S[l] += net.type(j).u[l];
    return S;
  };

  CascadeResult res;
  std::vector<char> D(n, 0);
  bool any = false;
  for (std::size_t i = 0; i < n; ++i)
    if (state.solvent(i) && (is_forced[i] || K_pre[i] <= 0.0)) D[i] = 1, any = true;
  if (!any) return res;
  res.waves.push_back(collect(D));

  // Smallest closed set: add banks pushed to or below zero by the current set.
  std::vector<double> S = borrowing(D);
  for (;;) {
    std::vector<std::size_t> added;
    for (std::size_t i = 0; i < n; ++i) {
      if (D[i] || !state.solvent(i)) continue;
      if (K_pre[i] - cascade_loss(net, R, psi_t, i, S, false) <= 0.0) added.push_back(i);
    }
    if (added.empty()) break;
    for (auto i : added) {
      D[i] = 1;
      for (std::size_t l = 0; l < k; ++l) S[l] += net.type(i).u[l];
    }
    res.waves.push_back(collect(D));
  }

  if (kind == ClearingKind::least) {
    // Candidates: every solvent bank with an exposure path from the trigger set.
    std::vector<char> C(D);
    std::deque<std::size_t> queue(res.waves.front().begin(), res.waves.front().end());
    while (!queue.empty()) {
      const std::size_t j = queue.front();
      queue.pop_front();
      for (std::size_t i = 0; i < n; ++i) {
        if (C[i] || !state.solvent(i)) continue;
        if (net.lambda(j, i) > 0.0) {
          C[i] = 1;
          queue.push_back(i);
        }
      }
    }
    // Remove banks that survive the write-downs of the others until stable.
    std::vector<char> E(C);
    for (;;) {
      const auto SE = borrowing(E);
      std::vector<char> next(n, 0);
      for (std::size_t i = 0; i < n; ++i) {
        if (!E[i]) continue;
        if (is_forced[i] || K_pre[i] - cascade_loss(net, R, psi_t, i, SE, true) <= 0.0) next[i] = 1;
      }
      if (next == E) break;
      E = std::move(next);
    }
    if (E != D) res.waves.push_back(collect(E));
  }

  res.defaults = res.waves.back();
  return res;
}

namespace {

class Sweep {
 public:
  Sweep(const PathBundle& paths, const LiabilityNetwork& net, double R, ClearingKind kind)
      : paths_(paths), net_(net), R_(R), kind_(kind), n_(net.size()), state_(net.size()),
        H_(net.factors(), 0.0), c_(net.size()) {
    for (std::size_t i = 0; i < n_; ++i) c_[i] = liability_side(net_, R_, H_, i, kNever, false);
  }

  ClearingSolution run() {
    const auto& grid = paths_.grid;
    const std::size_t M = grid.steps();
    const double tol = kEventTolerance * grid.horizon();
    ClearingSolution sol;
    sol.kind = kind_;
    sol.K.resize(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(M + 1));

    std::vector<double> K(n_);
    capital(0, 0.0, K);
    if (any_alive_at_or_below_zero(K)) apply_event(0.0, K);
    store(sol.K, 0);

    for (std::size_t m = 0; m < M; ++m) {
      double lo = 0.0;
      for (;;) {
        capital(m, 1.0, K);
        std::vector<std::size_t> cand;
        for (std::size_t i = 0; i < n_; ++i)
          if (state_.solvent(i) && K[i] <= 0.0) cand.push_back(i);
        if (cand.empty()) break;
        double hi = 1.0;
        while ((hi - lo) * grid.dt(m) > tol) {
          const double mid = 0.5 * (lo + hi);
          double g = INFINITY;
          for (auto i : cand) g = std::min(g, std::exp(paths_.log_xe_at(i, m, mid)) - c_[i]);
          if (g <= 0.0) hi = mid;
          else lo = mid;
        }
        capital(m, hi, K);
        const double te = hi == 1.0 ? grid[m + 1] : grid.at(m, hi);
        apply_event(te, K);
        lo = hi;
        if (hi == 1.0) break;
      }
      store(sol.K, m + 1);
    }
    sol.state = std::move(state_);
    return sol;
  }

 private:
  void capital(std::size_t m, double theta, std::vector<double>& K) const {
    for (std::size_t i = 0; i < n_; ++i) K[i] = std::exp(paths_.log_xe_at(i, m, theta)) - c_[i];
  }

  bool any_alive_at_or_below_zero(const std::vector<double>& K) const {
    for (std::size_t i = 0; i < n_; ++i)
      if (state_.solvent(i) && K[i] <= 0.0) return true;
    return false;
  }

  void apply_event(double t, const std::vector<double>& K_pre) {
    auto res = resolve_cascade(t, K_pre, state_, net_, R_, kind_);
    if (res.defaults.empty()) return;
    const double w = net_.schedule()(t);
    for (auto j : res.defaults) {
      state_.tau[j] = t;
      for (std::size_t l = 0; l < H_.size(); ++l) H_[l] += w * net_.type(j).u[l];
    }
    for (std::size_t i = 0; i < n_; ++i)
      c_[i] = liability_side(net_, R_, H_, i, state_.tau[i], !state_.solvent(i));
    state_.events.push_back({t, std::move(res.waves)});
  }

  void store(Eigen::MatrixXd& out, std::size_t m) const {
    for (std::size_t i = 0; i < n_; ++i)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) =
          std::exp(paths_.log_xe(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m))) -
          c_[i];
  }

  const PathBundle& paths_;
  const LiabilityNetwork& net_;
  double R_;
  ClearingKind kind_;
  std::size_t n_;
  SolvencyState state_;
  std::vector<double> H_;
  std::vector<double> c_;
};

}  // namespace

ClearingSolution solve_clearing(const PathBundle& paths, const LiabilityNetwork& net, double R,
                                ClearingKind kind) {
  validate_recovery(R);
  check_sizes(paths, net);
  return Sweep(paths, net, R, kind).run();
}

ClearingSolution greatest_clearing(const PathBundle& paths, const LiabilityNetwork& net, double R) {
  return solve_clearing(paths, net, R, ClearingKind::greatest);
}

ClearingSolution least_clearing(const PathBundle& paths, const LiabilityNetwork& net, double R) {
  return solve_clearing(paths, net, R, ClearingKind::least);
}

}  // namespace contagion
