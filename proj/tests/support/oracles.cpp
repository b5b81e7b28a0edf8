#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace oracle {

using namespace contagion;

Eigen::MatrixXd dense_lambda(const LiabilityNetwork& net) {
  const auto n = static_cast<Eigen::Index>(net.size());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto& u = net.type(static_cast<std::size_t>(i)).u;
      const auto& v = net.type(static_cast<std::size_t>(j)).v;
      double s = 0.0;
      for (std::size_t l = 0; l < u.size(); ++l) s += u[l] * v[l];
      L(i, j) = net.scale() * s;
    }
  return L;
}

LiabilityNetwork matrix_network(const Eigen::MatrixXd& lambda, std::vector<double> lambda_ext,
                                RepaymentSchedule schedule) {
  const auto n = static_cast<std::size_t>(lambda.rows());
  std::vector<TypeVector> types(n);
  for (std::size_t i = 0; i < n; ++i) {
    types[i].u.assign(n, 0.0);
    types[i].u[i] = 1.0;
    types[i].v.assign(n, 0.0);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) types[j].v[i] = lambda(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return build_low_rank(std::move(types), std::move(lambda_ext), std::move(schedule));
}

namespace {

double net_liability(const Eigen::MatrixXd& L, const LiabilityNetwork& net, std::size_t i) {
  const auto r = static_cast<Eigen::Index>(i);
  return net.lambda_ext(i) + L.row(r).sum() - L.col(r).sum();
}

}  // namespace

std::vector<double> capital(double t, const PathBundle& paths, const LiabilityNetwork& net, double R,
                            std::span<const double> tau) {
  const auto L = dense_lambda(net);
  const auto& psi = net.schedule();
  const double psi0 = psi.initial();
  std::vector<double> K(net.size());
  for (std::size_t i = 0; i < net.size(); ++i) {
    double loss = 0.0;
    for (std::size_t j = 0; j < net.size(); ++j) {
      if (j == i || !(tau[j] <= t)) continue;
      loss += (1.0 - R) * psi(tau[j]) * L(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
    }
    K[i] = std::exp(paths.log_xe_at_time(i, t)) - psi0 * net_liability(L, net, i) - loss;
  }
  return K;
}

std::vector<double> cash(double t, const PathBundle& paths, const LiabilityNetwork& net, double R,
                         std::span<const double> tau) {
  const auto L = dense_lambda(net);
  const auto& psi = net.schedule();
  const double psi0 = psi.initial();
  const double paid = psi0 - psi(t);
  const auto [m, theta] = paths.grid.locate(t);
  std::vector<double> V(net.size());
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    double v = std::exp(paths.log_x_at(i, m, theta)) - paid * net.lambda_ext(i);
    for (std::size_t j = 0; j < net.size(); ++j) {
      if (j == i) continue;
      const auto c = static_cast<Eigen::Index>(j);
      v -= paid * L(r, c);
      if (tau[j] <= t) {
        // Paid up to tau_j, then the remainder accelerated at recovery R.
        const double upto = psi0 - psi(tau[j]);
        v += ((1.0 - R) * upto + R * psi0) * L(c, r);
      } else {
        v += paid * L(c, r);
      }
    }
    V[i] = v;
  }
  return V;
}

double cascade_margin(std::span<const double> K_pre, const std::vector<bool>& solvent,
                      const Eigen::MatrixXd& lambda, double R, double psi_t) {
  const std::size_t n = K_pre.size();
  std::vector<bool> D(n, false);
  double margin = std::numeric_limits<double>::infinity();
  for (;;) {
    std::vector<bool> next(n, false);
    for (std::size_t i = 0; i < n; ++i) {
      if (!solvent[i]) continue;
      double loss = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i && D[j]) loss += lambda(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
      const double k = K_pre[i] - (1.0 - R) * psi_t * loss;
      margin = std::min(margin, std::abs(k));
      next[i] = k <= 0.0;
    }
    if (next == D) return margin;
    D = std::move(next);
  }
}

Enumeration enumerate_cascade(std::span<const double> K_pre, const std::vector<bool>& solvent,
                              const Eigen::MatrixXd& lambda, double R, double psi_t,
                              const std::vector<std::size_t>& forced) {
  const std::size_t n = K_pre.size();
  if (n > 20) throw std::invalid_argument("enumeration limited to n <= 20");
  std::vector<bool> is_forced(n, false);
  for (auto f : forced) is_forced[f] = true;

  std::uint32_t wave0 = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (solvent[i] && (is_forced[i] || K_pre[i] <= 0.0)) wave0 |= 1u << i;

  auto phi = [&](std::uint32_t D, std::uint32_t allowed) {
    std::uint32_t out = wave0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!solvent[i] || !(allowed >> i & 1u)) continue;
      double loss = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i && (D >> j & 1u))
          loss += lambda(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
      if (K_pre[i] - (1.0 - R) * psi_t * loss <= 0.0) out |= 1u << i;
    }
    return out;
  };
  auto members = [n](std::uint32_t D) {
    std::vector<std::size_t> v;
    for (std::size_t i = 0; i < n; ++i)
      if (D >> i & 1u) v.push_back(i);
    return v;
  };

  Enumeration e;
  if (!wave0) return e;

  const std::uint32_t all = n == 32 ? ~0u : ((1u << n) - 1u);
  std::vector<std::uint32_t> fps;
  for (std::uint32_t D = 0; D <= all; ++D)
    if (phi(D, all) == D) fps.push_back(D);
  std::uint32_t least = all;
  std::size_t least_size = n + 1;
  for (auto D : fps) {
    const auto c = static_cast<std::size_t>(__builtin_popcount(D));
    if (c < least_size) least = D, least_size = c;
  }
  for (auto D : fps) {
    if ((least & D) != least) e.least_is_minimum = false;
    e.fixed_points.push_back(members(D));
  }
  e.least = members(least);

  // Banks reachable from wave 0 along positive exposures.
  std::uint32_t C = wave0;
  std::deque<std::size_t> q;
  for (std::size_t i = 0; i < n; ++i)
    if (wave0 >> i & 1u) q.push_back(i);
  while (!q.empty()) {
    const std::size_t j = q.front();
    q.pop_front();
    for (std::size_t i = 0; i < n; ++i)
      if (solvent[i] && !(C >> i & 1u) &&
          lambda(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) > 0.0) {
        C |= 1u << i;
        q.push_back(i);
      }
  }
  std::uint32_t greatest = 0;
  std::size_t greatest_size = 0;
  for (std::uint32_t D = C;; D = (D - 1) & C) {
    if (phi(D, C) == D) {
      const auto c = static_cast<std::size_t>(__builtin_popcount(D));
      if (c >= greatest_size && (D & greatest) == greatest) greatest = D, greatest_size = c;
    }
    if (D == 0) break;
  }
  e.greatest = members(greatest);
  return e;
}

double lattice_theta(const JumpContext& ctx, std::size_t a, double f) {
  const double loss = (1.0 - ctx.R) * (ctx.history[a] + ctx.psi_ratio * f) / ctx.Lambda[a];
  return std::log1p(loss) - ctx.F[a];
}

std::vector<std::size_t> lattice_jump(const JumpContext& ctx) {
  const std::size_t types = ctx.X.size();
  std::vector<std::size_t> h(types, 0);
  std::vector<std::vector<std::size_t>> fixed;

  auto consistent = [&](const std::vector<std::size_t>& cand) {
    std::vector<double> delta(ctx.k, 0.0);
    for (std::size_t a = 0; a < types; ++a)
      for (std::size_t l = 0; l < ctx.k; ++l)
        delta[l] += ctx.weight[a] * ctx.atom[a]->u[l] * static_cast<double>(cand[a]) /
                    static_cast<double>(ctx.count[a]);
    for (std::size_t a = 0; a < types; ++a) {
      double f = 0.0;
      for (std::size_t l = 0; l < ctx.k; ++l) f += ctx.atom[a]->v[l] * delta[l];
      const double th = lattice_theta(ctx, a, f);
      std::size_t c = 0;
      for (double x : ctx.X[a]) c += x <= th ? 1 : 0;
      if (c != cand[a]) return false;
    }
    return true;
  };

  for (;;) {
    if (consistent(h)) fixed.push_back(h);
    std::size_t a = 0;
    while (a < types && h[a] == ctx.X[a].size()) h[a++] = 0;
    if (a == types) break;
    ++h[a];
  }
  if (fixed.empty()) throw std::logic_error("lattice search found no fixed point");
  // Componentwise least element.
  std::vector<std::size_t> least = fixed.front();
  for (const auto& f : fixed)
    for (std::size_t a = 0; a < types; ++a) least[a] = std::min(least[a], f[a]);
  if (std::find(fixed.begin(), fixed.end(), least) == fixed.end())
    throw std::logic_error("fixed points have no least element");
  return least;
}

Scenario random_scenario(std::mt19937_64& gen, std::size_t n_min, std::size_t n_max, bool allow_full_recovery) {
  std::uniform_int_distribution<std::size_t> pick_n(n_min, n_max);
  std::uniform_int_distribution<std::size_t> pick_k(1, 3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const std::size_t n = pick_n(gen);
  const std::size_t k = pick_k(gen);

  std::vector<TypeVector> types(n);
  for (auto& t : types) {
    t.u.resize(k);
    t.v.resize(k);
    for (std::size_t l = 0; l < k; ++l) {
      t.u[l] = U(gen) < 0.2 ? 0.0 : U(gen);
      t.v[l] = U(gen) < 0.2 ? 0.0 : U(gen);
    }
  }
  std::vector<double> inter(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) inter[i] += dot(types[i].u, types[j].v) - dot(types[j].u, types[i].v);
  std::vector<double> ext(n);
  for (std::size_t i = 0; i < n; ++i) ext[i] = std::max(0.0, -inter[i]) + 0.3 + 1.2 * U(gen);

  RepaymentSchedule sched = RepaymentSchedule::linear(1.0);
  if (U(gen) < 0.3) {
    const double a = 0.5 + 0.4 * U(gen);
    const double b = 0.1 + 0.3 * U(gen) * a;
    sched = RepaymentSchedule::table({0.0, 0.3, 0.7, 1.0}, {1.0, a, b, 0.0});
  }
  auto net = build_low_rank(std::move(types), std::move(ext), sched);

  Scenario s{std::move(net), {}, {}, TimeGrid::uniform(1.0, 100 + static_cast<std::size_t>(100 * U(gen))), 0.0,
             gen()};
  s.model.rho = -0.5 + 1.4 * U(gen);
  for (std::size_t i = 0; i < n; ++i) {
    const double mu = -0.1 + 0.2 * U(gen);
    s.model.mu.emplace_back(mu);
    s.model.sigma.emplace_back(0.15 + 0.35 * U(gen));
    const double X0 = 0.05 + 0.55 * U(gen);
    s.x0.push_back(s.net.schedule().initial() * s.net.net_liability(i) * std::exp(X0 - mu));
  }
  s.R = allow_full_recovery && U(gen) < 0.1 ? 1.0 : 0.9 * U(gen);
  return s;
}

CascadeInstance random_cascade_instance(std::mt19937_64& gen, std::size_t n_max) {
  std::uniform_int_distribution<std::size_t> pick_n(1, n_max);
  std::uniform_int_distribution<std::size_t> pick_k(1, 3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const std::size_t n = pick_n(gen);
  const std::size_t k = pick_k(gen);
  const bool lattice = U(gen) < 0.5;
  auto draw = [&](double scale) {
    return lattice ? 0.5 * std::floor(3.0 * U(gen)) * scale : (U(gen) < 0.25 ? 0.0 : scale * U(gen));
  };

  std::vector<TypeVector> types(n);
  for (auto& t : types) {
    t.u.resize(k);
    t.v.resize(k);
    for (std::size_t l = 0; l < k; ++l) t.u[l] = draw(1.0), t.v[l] = draw(1.0);
  }
  double total = 0.0;
  for (const auto& t : types) total += dot(t.u, t.u) + dot(t.v, t.v);
  std::vector<double> ext(n, 2.0 * total + 1.0);
  const double T = 1.0;
  const double t = lattice ? 0.5 : U(gen);
  auto net = build_low_rank(std::move(types), std::move(ext), RepaymentSchedule::linear(T));

  CascadeInstance c{std::move(net), t, lattice ? 0.5 * std::floor(2.0 * U(gen)) : 0.9 * U(gen), {},
                    SolvencyState(n), {}, {}};
  c.H.assign(k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (n > 2 && U(gen) < 0.15) {
      c.state.tau[i] = t * U(gen);
      const double psi_tau = c.net.schedule()(c.state.tau[i]);
      for (std::size_t l = 0; l < k; ++l) c.H[l] += psi_tau * c.net.type(i).u[l];
    }
  const double psi0 = c.net.schedule().initial();
  for (std::size_t i = 0; i < n; ++i) {
    const double K = lattice ? 0.125 * std::floor(12.0 * U(gen)) - 0.25 : -0.2 + 1.4 * U(gen);
    c.K_pre.push_back(K);
    const double loss = (1.0 - c.R) * c.net.scale() * dot(c.net.type(i).v, c.H);
    c.x_expect.push_back(K + psi0 * c.net.net_liability(i) + loss);
  }
  return c;
}

double first_passage_fraction(const InitialLaw& law, std::size_t type, double sigma, double rho,
                              std::span<const double> B0, const TimeGrid& grid, std::size_t count,
                              std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> Z(0.0, 1.0);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const auto& a = law.asset(type);
  std::size_t dead = 0;
  for (std::size_t p = 0; p < count; ++p) {
    double logx;
    if (a.is_uniform()) {
      logx = std::log(a.lower() + (a.upper() - a.lower()) * U(gen));
    } else {
      double r = U(gen);
      std::size_t c = 0;
      while (c + 1 < a.weights().size() && r > a.weights()[c]) r -= a.weights()[c++];
      logx = a.log_means()[c] + a.log_sds()[c] * Z(gen);
    }
    double X = logx - law.shift(type);
    bool alive = X > 0.0;
    for (std::size_t m = 0; alive && m < grid.steps(); ++m) {
      const double dt = grid.dt(m);
      X += -0.5 * sigma * sigma * dt +
           sigma * (std::sqrt(1.0 - rho * rho) * std::sqrt(dt) * Z(gen) + rho * (B0[m + 1] - B0[m]));
      alive = X > 0.0;
    }
    dead += alive ? 0 : 1;
  }
  return static_cast<double>(dead) / static_cast<double>(count);
}

contagion::JumpContext lattice_context(std::mt19937_64& gen, std::vector<contagion::TypeVector>& atoms) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::uniform_int_distribution<int> steps(0, 40);
  atoms.assign(2, {});
  for (auto& a : atoms) {
    a.u = {std::floor(1.0 + 4.0 * U(gen)) / 4.0, std::floor(4.0 * U(gen)) / 4.0};
    a.v = {std::floor(1.0 + 8.0 * U(gen)) / 2.0, std::floor(1.0 + 8.0 * U(gen)) / 2.0};
  }
  contagion::JumpContext ctx;
  ctx.time = 0.5;
  ctx.psi_ratio = 0.5;
  ctx.R = U(gen) < 0.5 ? 0.0 : 0.5;
  ctx.k = 2;
  ctx.atom = {&atoms[0], &atoms[1]};
  ctx.weight = {0.5, 0.5};
  ctx.Lambda = {0.5 + std::floor(8.0 * U(gen)) / 4.0, 0.5 + std::floor(8.0 * U(gen)) / 4.0};
  ctx.history = {0.0, 0.0};
  ctx.F = {0.0, 0.0};
  const double h = 1.0 / 64.0;
  for (std::size_t a = 0; a < 2; ++a) {
    const std::size_t c = 8 + static_cast<std::size_t>(8.0 * U(gen));
    ctx.count.push_back(c + 10);
    std::vector<double> X;
    for (std::size_t j = 0; j < c; ++j) X.push_back(h * double(steps(gen) - 2));
    std::sort(X.begin(), X.end());
    ctx.X.push_back(X);
  }
  return ctx;
}


}  // namespace oracle
