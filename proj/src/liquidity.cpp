#include "contagion/liquidity.hpp"

#include <algorithm>
#include <cmath>

#include "contagion/error.hpp"

namespace contagion {

std::string to_string(DefaultCause c) {
  switch (c) {
    case DefaultCause::illiquid: return "illiquid";
    case DefaultCause::insolvent: return "insolvent";
    case DefaultCause::both: return "both";
    case DefaultCause::none: break;
  }
  return "none";
}

std::vector<double> cash_given_solvency(double t, const PathBundle& paths,
                                        const LiabilityNetwork& net, double R,
                                        std::span<const double> tau) {
  validate_recovery(R);
  const std::size_t n = net.size();
  if (paths.size() != n || tau.size() != n) throw DimensionMismatch("sizes of paths, tau and network differ");
  const auto& psi = net.schedule();
  const double psi0 = psi.initial();
  const double Lt = psi0 - psi(t);
  const auto [m, theta] = paths.grid.locate(t);
  std::vector<double> V(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = std::exp(paths.log_x_at(i, m, theta)) - Lt * net.lambda_ext(i);
    for (std::size_t j = 0; j < n; ++j) {
      const double lji = net.lambda(j, i);
      if (tau[j] > t)
        v += Lt * lji;
      else
        v += (1.0 - R) * (psi0 - psi(tau[j])) * lji + R * psi0 * lji;
      v -= Lt * net.lambda(i, j);
    }
    V[i] = v;
  }
  return V;
}

namespace {

enum class Mode { cash, joint, joint_capital_only };

class LiquiditySweep {
 public:
  LiquiditySweep(const PathBundle& paths, const LiabilityNetwork& net, double R, Mode mode)
      : paths_(paths), net_(net), R_(R), mode_(mode), n_(net.size()), k_(net.factors()),
        state_(net.size()), H_(k_, 0.0), Sdef_(k_, 0.0), a_(n_), b_(n_, 0.0), kc_(n_), cc_(n_, 0.0),
        cause_(n_, DefaultCause::none) {
    const double s = net.scale();
    const auto U = net.borrowing_total();
    const auto Vt = net.lending_total();
    for (std::size_t i = 0; i < n_; ++i) {
      const auto& ti = net.type(i);
      double in = 0.0, out = 0.0;
      for (std::size_t l = 0; l < k_; ++l) {
        in += ti.v[l] * (U[l] - ti.u[l]);
        out += ti.u[l] * (Vt[l] - ti.v[l]);
      }
      a_[i] = s * in - s * out - net.lambda_ext(i);
    }
    refresh();
  }

  JointSolution run() {
    const auto& grid = paths_.grid;
    const std::size_t M = grid.steps();
    const double tol = kEventTolerance * grid.horizon();
    const auto P = static_cast<Eigen::Index>(M + 1);
    JointSolution out;
    out.capital.K.resize(static_cast<Eigen::Index>(n_), P);
    out.cash.V.resize(static_cast<Eigen::Index>(n_), P);
    out.capital.kind = ClearingKind::greatest;
    out.cash.kind = mode_ == Mode::cash ? CashKind::illiquidity_only : CashKind::joint;

    std::vector<double> V(n_), K(n_);
    evaluate(0, 0.0, V, K);
    if (any_trigger(V, K)) apply_event(0.0, 0, 0.0, V, K, out.cash);
    store(out, 0);

    for (std::size_t m = 0; m < M; ++m) {
      double lo = 0.0;
      for (;;) {
        evaluate(m, 1.0, V, K);
        std::vector<std::size_t> cand;
        for (std::size_t i = 0; i < n_; ++i)
          if (state_.solvent(i) && trigger(V[i], K[i]) <= 0.0) cand.push_back(i);
        if (cand.empty()) break;
        double hi = 1.0;
        while ((hi - lo) * grid.dt(m) > tol) {
          const double mid = 0.5 * (lo + hi);
          double g = INFINITY;
          for (auto i : cand) g = std::min(g, trigger_at(i, m, mid));
          if (g <= 0.0) hi = mid;
          else lo = mid;
        }
        evaluate(m, hi, V, K);
        const double te = hi == 1.0 ? grid[m + 1] : grid.at(m, hi);
        apply_event(te, m, hi, V, K, out.cash);
        lo = hi;
        if (hi == 1.0) break;
      }
      store(out, m + 1);
    }
    out.cash.cause = cause_;
    out.cash.state = state_;
    out.capital.state = std::move(state_);
    return out;
  }

 private:
  double cash(std::size_t i, std::size_t m, double theta) const {
    const double t = paths_.grid.at(m, theta);
    const double psi_t = net_.schedule()(t);
    const double Lt = net_.schedule().initial() - psi_t;
    return std::exp(paths_.log_x_at(i, m, theta)) + Lt * a_[i] + psi_t * b_[i] - cc_[i];
  }

  double capital(std::size_t i, std::size_t m, double theta) const {
    return std::exp(paths_.log_xe_at(i, m, theta)) - kc_[i];
  }

  double trigger(double V, double K) const {
    switch (mode_) {
      case Mode::cash: return V;
      case Mode::joint: return std::min(V, K);
      case Mode::joint_capital_only: return K;
    }
    return K;
  }

  double trigger_at(std::size_t i, std::size_t m, double theta) const {
    switch (mode_) {
      case Mode::cash: return cash(i, m, theta);
      case Mode::joint: return std::min(cash(i, m, theta), capital(i, m, theta));
      case Mode::joint_capital_only: return capital(i, m, theta);
    }
    return capital(i, m, theta);
  }

  void evaluate(std::size_t m, double theta, std::vector<double>& V, std::vector<double>& K) const {
    for (std::size_t i = 0; i < n_; ++i) {
      V[i] = cash(i, m, theta);
      K[i] = capital(i, m, theta);
    }
  }

  bool any_trigger(const std::vector<double>& V, const std::vector<double>& K) const {
    for (std::size_t i = 0; i < n_; ++i)
      if (state_.solvent(i) && trigger(V[i], K[i]) <= 0.0) return true;
    return false;
  }

  // Same arithmetic as the clearing sweep so capital-only runs agree bit for bit.
  void refresh() {
    const double s = net_.scale();
    const double psi0 = net_.schedule().initial();
    for (std::size_t i = 0; i < n_; ++i) {
      const auto& ti = net_.type(i);
      const bool def = !state_.solvent(i);
      double c = dot(ti.v, H_);
      if (def) c -= net_.schedule()(state_.tau[i]) * dot(ti.u, ti.v);
      kc_[i] = psi0 * net_.net_liability(i) + (1.0 - R_) * s * c;
      cc_[i] = (1.0 - R_) * s * c;
      double b = dot(ti.v, Sdef_);
      if (def) b -= dot(ti.u, ti.v);
      b_[i] = s * b;
    }
  }

  void apply_event(double t, std::size_t m, double theta, const std::vector<double>& V_pre,
                   const std::vector<double>& K_pre, CashSolution& cs) {
    std::vector<std::size_t> illiquid;
    if (mode_ != Mode::joint_capital_only)
      for (std::size_t i = 0; i < n_; ++i)
        if (state_.solvent(i) && V_pre[i] <= 0.0) illiquid.push_back(i);

    CascadeResult res;
    if (mode_ == Mode::cash) {
      res.defaults = illiquid;
      if (!illiquid.empty()) res.waves.push_back(illiquid);
    } else {
      res = resolve_cascade(t, K_pre, state_, net_, R_, ClearingKind::greatest, illiquid);
    }
    if (res.defaults.empty()) return;

    std::vector<char> is_illiquid(n_, 0);
    for (auto i : illiquid) is_illiquid[i] = 1;
    const double w = net_.schedule()(t);
    for (auto j : res.defaults) {
      state_.tau[j] = t;
      for (std::size_t l = 0; l < k_; ++l) {
        H_[l] += w * net_.type(j).u[l];
        Sdef_[l] += net_.type(j).u[l];
      }
      const bool ins = mode_ != Mode::cash && K_pre[j] <= 0.0;
      if (is_illiquid[j]) cause_[j] = ins ? DefaultCause::both : DefaultCause::illiquid;
      else cause_[j] = DefaultCause::insolvent;
    }
    refresh();
    for (std::size_t i = 0; i < n_; ++i) {
      if (!state_.solvent(i)) continue;
      cs.jumps.push_back({t, i, res.defaults, cash(i, m, theta) - V_pre[i]});
    }
    state_.events.push_back({t, std::move(res.waves)});
  }

  void store(JointSolution& out, std::size_t m) const {
    const auto c = static_cast<Eigen::Index>(m);
    for (std::size_t i = 0; i < n_; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      out.capital.K(r, c) = std::exp(paths_.log_xe(r, c)) - kc_[i];
      out.cash.V(r, c) = m == 0 ? cash(i, 0, 0.0) : cash(i, m - 1, 1.0);
    }
  }

  const PathBundle& paths_;
  const LiabilityNetwork& net_;
  double R_;
  Mode mode_;
  std::size_t n_, k_;
  SolvencyState state_;
  std::vector<double> H_, Sdef_;
  std::vector<double> a_, b_, kc_, cc_;
  std::vector<DefaultCause> cause_;
};

void check(const PathBundle& paths, const LiabilityNetwork& net, double R) {
  validate_recovery(R);
  if (paths.size() != net.size()) throw DimensionMismatch("path bundle and network sizes differ");
}

}  // namespace

CashSolution clearing_cash(const PathBundle& paths, const LiabilityNetwork& net, double R) {
  check(paths, net, R);
  auto out = LiquiditySweep(paths, net, R, Mode::cash).run();
  return std::move(out.cash);
}

JointSolution joint_clearing(const PathBundle& paths, const LiabilityNetwork& net, double R,
                             bool cash_trigger) {
  check(paths, net, R);
  return LiquiditySweep(paths, net, R, cash_trigger ? Mode::joint : Mode::joint_capital_only).run();
}

}  // namespace contagion
