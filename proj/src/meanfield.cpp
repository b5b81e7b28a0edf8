#include "contagion/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "contagion/error.hpp"
#include "contagion/rng.hpp"

namespace contagion {

// ---- problem --------------------------------------------------------------

void MeanFieldProblem::validate() const {
  dist.validate();
  const std::size_t A = dist.size();
  if (lambda_ext.size() != A || mu.size() != A || sigma.size() != A || initial_assets.size() != A)
    throw DimensionMismatch("lambda_ext, mu, sigma and initial assets must be given per atom");
  if (!(rho >= -1.0 && rho <= 1.0)) throw InvalidCorrelation("rho must lie in [-1, 1]");
  if (!(R >= 0.0 && R <= 1.0)) throw InvalidRecoveryRate("recovery rate must lie in [0, 1]");
  const auto L = net_liability();
  for (std::size_t a = 0; a < A; ++a)
    if (!(L[a] > 0.0)) throw NonPositiveNetLiability(a, L[a]);
}

std::vector<double> MeanFieldProblem::net_liability() const {
  return mean_field_net_liability(dist, lambda_ext);
}

std::vector<double> MeanFieldProblem::drift_integrals() const {
  std::vector<double> out(mu.size());
  for (std::size_t a = 0; a < mu.size(); ++a)
    out[a] = integrated_drift(mu[a], 0.0, schedule.horizon());
  return out;
}

InitialLaw MeanFieldProblem::initial_law() const {
  const auto L = net_liability();
  const auto D = drift_integrals();
  return initial_law_from_assets(initial_assets, L, schedule.initial(), D);
}

// ---- jump resolution ------------------------------------------------------

double JumpContext::theta(std::size_t type, double f) const {
  return std::log1p((1.0 - R) / Lambda[type] * (history[type] + psi_ratio * f)) - F[type];
}

std::vector<std::size_t> JumpContext::hits(std::span<const double> delta, double eps) const {
  std::vector<std::size_t> h(X.size());
  for (std::size_t t = 0; t < X.size(); ++t) {
    const double f = eps + dot(atom[t]->v, delta);
    const double th = theta(t, f);
    h[t] = static_cast<std::size_t>(std::upper_bound(X[t].begin(), X[t].end(), th) - X[t].begin());
  }
  return h;
}

std::vector<double> JumpContext::mass(std::span<const std::size_t> h) const {
  std::vector<double> m(k, 0.0);
  for (std::size_t t = 0; t < h.size(); ++t) {
    if (h[t] == 0) continue;
    const double frac = weight[t] * static_cast<double>(h[t]) / static_cast<double>(count[t]);
    for (std::size_t l = 0; l < k; ++l) m[l] += frac * atom[t]->u[l];
  }
  return m;
}

double JumpContext::scale() const {
  std::vector<double> Eu(k, 0.0);
  for (std::size_t t = 0; t < atom.size(); ++t)
    for (std::size_t l = 0; l < k; ++l) Eu[l] += weight[t] * atom[t]->u[l];
  double s = 0.0;
  for (const auto* a : atom) s = std::max(s, dot(a->v, Eu));
  return s;
}

namespace {

double max_loss_gap(const JumpContext& ctx, std::span<const double> a, std::span<const double> b) {
  double g = 0.0;
  for (const auto* at : ctx.atom) {
    double s = 0.0;
    for (std::size_t l = 0; l < ctx.k; ++l) s += at->v[l] * (a[l] - b[l]);
    g = std::max(g, std::abs(s));
  }
  return g;
}

struct EpsRun {
  std::vector<std::size_t> hits;
  std::vector<double> delta;
  std::vector<std::vector<double>> iterates;
  bool stabilized = false;
  std::size_t iterations = 0;
};

EpsRun iterate(const JumpContext& ctx, double eps, std::size_t m_max) {
  EpsRun r;
  const std::vector<double> zero(ctx.k, 0.0);
  r.hits = ctx.hits(zero, eps);
  r.delta = ctx.mass(r.hits);
  r.iterates.push_back(r.delta);
  for (std::size_t m = 0; m < m_max; ++m) {
    auto next = ctx.hits(r.delta, eps);
    ++r.iterations;
    if (next == r.hits) {
      r.stabilized = true;
      break;
    }
    r.hits = std::move(next);
    r.delta = ctx.mass(r.hits);
    r.iterates.push_back(r.delta);
  }
  return r;
}

}  // namespace

JumpResolution resolve_jump_mean_field(const JumpContext& ctx, const JumpOptions& options) {
  JumpResolution res;
  const double scale = ctx.scale();
  const std::vector<double> zero(ctx.k, 0.0);

  auto finish = [&](std::vector<double> delta, double eps, bool stab) {
    res.delta = std::move(delta);
    res.eps = eps;
    res.stabilized = res.stabilized && stab;
    res.hits = ctx.hits(res.delta, 0.0);
    return res;
  };

  if (scale == 0.0) {
    // No interbank exposure: only banks already at or below the barrier fail.
    res.hits = ctx.hits(zero, 0.0);
    res.delta = ctx.mass(res.hits);
    return res;
  }

  std::vector<double> schedule = options.eps_schedule;
  double eps = schedule.empty() ? 1e-4 : schedule.back();
  for (std::size_t r = 0; r < options.max_refinements; ++r) schedule.push_back(eps *= 0.1);

  bool have_prev = false;
  EpsRun prev;
  std::optional<EpsRun> accepted;
  double accepted_eps = 0.0;
  for (const double e : schedule) {
    auto run = iterate(ctx, e * scale, options.m_max);
    res.iterations += run.iterations;
    res.iterates.push_back(run.iterates);
    if (!run.stabilized) res.stabilized = false;
    if (have_prev && max_loss_gap(ctx, run.delta, prev.delta) < options.accept_tol) {
      accepted = std::move(run);
      accepted_eps = e * scale;
      break;
    }
    prev = std::move(run);
    have_prev = true;
  }
  // Exact iteration from Xi(0); an accepted eps run stands only if it reaches the same hits.
  auto exact = iterate(ctx, 0.0, options.m_max);
  res.iterations += exact.iterations;
  if (accepted && accepted->hits == exact.hits) return finish(accepted->delta, accepted_eps, accepted->stabilized);
  res.iterates.push_back(exact.iterates);
  return finish(exact.delta, 0.0, exact.stabilized);
}

double jump_constraint_residual(const JumpContext& ctx, std::span<const double> delta) {
  const auto xi = ctx.mass(ctx.hits(delta, 0.0));
  return max_loss_gap(ctx, delta, xi);
}

// ---- kernels --------------------------------------------------------------

void advance_particles(std::span<double> X, std::span<char> alive,
                       std::span<const std::uint32_t> type, const StepCoefficients& c,
                       std::uint64_t seed, std::uint64_t step) {
  const auto P = static_cast<std::int64_t>(X.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < P; ++p) {
    if (!alive[static_cast<std::size_t>(p)]) continue;
    const std::uint32_t t = type[static_cast<std::size_t>(p)];
    const double z = rng::normal(seed, static_cast<std::uint64_t>(p), step);
    X[static_cast<std::size_t>(p)] += c.drift[t] + c.vol[t] * (c.idio * c.sqrt_dt * z + c.common);
  }
}

void advance_particles_serial(std::span<double> X, std::span<char> alive,
                              std::span<const std::uint32_t> type, const StepCoefficients& c,
                              std::uint64_t seed, std::uint64_t step) {
  for (std::size_t p = 0; p < X.size(); ++p) {
    if (!alive[p]) continue;
    const std::uint32_t t = type[p];
    const double z = rng::normal(seed, p, step);
    X[p] += c.drift[t] + c.vol[t] * (c.idio * c.sqrt_dt * z + c.common);
  }
}

// ---- state ----------------------------------------------------------------

double MeanFieldState::largest_step_increment() const {
  double m = 0.0;
  for (double s : step_increment) m = std::max(m, s);
  return m;
}

double MeanFieldState::loss_at(std::span<const double> v, std::size_t m) const {
  double s = 0.0;
  for (std::size_t l = 0; l < v.size(); ++l)
    s += v[l] * losses(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(m));
  return s;
}

// ---- solver ---------------------------------------------------------------

namespace {

class MeanFieldSolver {
 public:
  MeanFieldSolver(const MeanFieldProblem& pb, std::span<const double> B0, const TimeGrid& grid,
                  const MeanFieldOptions& opt)
      : pb_(pb), B0_(B0), grid_(grid), opt_(opt), A_(pb.dist.size()), k_(pb.dist.factors()) {}

  MeanFieldState run() {
    pb_.validate();
    if (opt_.particles < 1) throw std::invalid_argument("need at least one particle");
    if (B0_.size() != grid_.points()) throw DimensionMismatch("B0 must have one value per grid point");
    if (std::abs(grid_.horizon() - pb_.schedule.horizon()) > 1e-12 * pb_.schedule.horizon())
      throw std::invalid_argument("grid horizon must equal the schedule horizon");

    Lambda_ = pb_.net_liability();
    const auto init = pb_.initial_law();
    const std::size_t P = opt_.particles;
    const std::size_t M = grid_.steps();
    const auto pts = static_cast<Eigen::Index>(M + 1);

    st_.grid = grid_;
    st_.losses = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k_), pts);
    st_.cond_default = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(A_), pts);
    st_.alive_fraction = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(A_), pts);
    st_.F = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(A_), pts);
    st_.step_increment.assign(M, 0.0);

    const auto sampled = sample_types(pb_.dist, P, rng::derive_seed(opt_.seed, rng::kTypeSampling),
                                      opt_.stratified);
    st_.type.resize(P);
    st_.type_counts.assign(A_, 0);
    for (std::size_t p = 0; p < P; ++p) {
      st_.type[p] = static_cast<std::uint32_t>(sampled.atoms[p]);
      ++st_.type_counts[sampled.atoms[p]];
    }
    for (std::size_t a = 0; a < A_; ++a)
      if (pb_.dist.weights[a] > 0.0 && st_.type_counts[a] < 100)
        st_.warnings.push_back("InsufficientParticlesPerType: type " + std::to_string(a) + " has " +
                               std::to_string(st_.type_counts[a]) + " particles");

    const auto init_seed = rng::derive_seed(opt_.seed, rng::kInitialAssets);
    st_.X.resize(P);
    st_.tau.assign(P, kNeverTime);
    alive_.assign(P, 1);
    for (std::size_t p = 0; p < P; ++p) st_.X[p] = init.sample(st_.type[p], init_seed, p);

    dead_.assign(A_, 0);
    G_.assign(k_, 0.0);
    F_.assign(A_, 0.0);
    if (opt_.hist_bins > 0) {
      st_.hist_edges.resize(opt_.hist_bins + 1);
      for (std::size_t b = 0; b <= opt_.hist_bins; ++b)
        st_.hist_edges[b] = opt_.hist_max * static_cast<double>(b) / static_cast<double>(opt_.hist_bins);
    }

    resolve(0, 0.0, nullptr);
    record(0);

    const auto idio_seed = rng::derive_seed(opt_.seed, rng::kMeanFieldIdiosyncratic);
    StepCoefficients c;
    c.drift.resize(A_);
    c.vol.resize(A_);
    c.idio = std::sqrt(std::max(0.0, 1.0 - pb_.rho * pb_.rho));
    for (std::size_t m = 0; m < M; ++m) {
      const double dt = grid_.dt(m);
      for (std::size_t a = 0; a < A_; ++a) {
        const double var = integrated_variance(pb_.sigma[a], grid_[m], grid_[m + 1]);
        c.drift[a] = -0.5 * var;
        c.vol[a] = std::sqrt(var / dt);
      }
      c.common = pb_.rho * (B0_[m + 1] - B0_[m]);
      c.sqrt_dt = std::sqrt(dt);
      if (opt_.parallel)
        advance_particles(st_.X, alive_, st_.type, c, idio_seed, m);
      else
        advance_particles_serial(st_.X, alive_, st_.type, c, idio_seed, m);
      resolve(m + 1, grid_[m + 1], &st_.step_increment[m]);
      record(m + 1);
    }
    for (std::size_t p = 0; p < P; ++p)
      if (alive_[p]) st_.tau[p] = kNeverTime;
    return std::move(st_);
  }

 private:
  static constexpr double kNeverTime = std::numeric_limits<double>::infinity();

  std::vector<double> current_losses() const {
    std::vector<double> L(k_, 0.0);
    for (std::size_t a = 0; a < A_; ++a) {
      if (dead_[a] == 0) continue;
      const double frac = pb_.dist.weights[a] * static_cast<double>(dead_[a]) /
                          static_cast<double>(st_.type_counts[a]);
      for (std::size_t l = 0; l < k_; ++l) L[l] += frac * pb_.dist.atoms[a].u[l];
    }
    return L;
  }

  void resolve(std::size_t m, double t, double* increment) {
    JumpContext ctx;
    ctx.time = t;
    ctx.psi_ratio = pb_.schedule(t) / pb_.schedule.initial();
    ctx.R = pb_.R;
    ctx.k = k_;
    ctx.weight = pb_.dist.weights;
    ctx.count = st_.type_counts;
    ctx.Lambda = Lambda_;
    ctx.F = F_;
    ctx.X.resize(A_);
    ctx.history.resize(A_);
    for (std::size_t a = 0; a < A_; ++a) {
      ctx.atom.push_back(&pb_.dist.atoms[a]);
      ctx.history[a] = dot(pb_.dist.atoms[a].v, G_);
    }
    // Anything a jump can reach lies below Theta at the largest possible loss.
    const auto before = current_losses();
    const double eps_max =
        (opt_.jump.eps_schedule.empty() ? 0.0
                                        : *std::max_element(opt_.jump.eps_schedule.begin(),
                                                            opt_.jump.eps_schedule.end())) *
        ctx.scale();
    std::vector<double> reach(A_);
    for (std::size_t a = 0; a < A_; ++a) {
      double remaining = 0.0;
      const auto Eu = pb_.dist.mean_u();
      for (std::size_t l = 0; l < k_; ++l)
        remaining += pb_.dist.atoms[a].v[l] * std::max(0.0, Eu[l] - before[l]);
      reach[a] = ctx.theta(a, 1.0001 * (remaining + eps_max) + 1e-12);
    }
    std::vector<std::vector<std::pair<double, std::size_t>>> cand(A_);
    for (std::size_t p = 0; p < st_.X.size(); ++p) {
      if (!alive_[p]) continue;
      const auto a = st_.type[p];
      if (st_.X[p] <= reach[a]) cand[a].emplace_back(st_.X[p], p);
    }
    for (std::size_t a = 0; a < A_; ++a) {
      std::sort(cand[a].begin(), cand[a].end());
      ctx.X[a].reserve(cand[a].size());
      for (const auto& [x, p] : cand[a]) ctx.X[a].push_back(x);
    }

    const std::vector<double> zero(k_, 0.0);
    const auto seed_hits = ctx.hits(zero, 0.0);
    bool any = false;
    for (auto h : seed_hits) any = any || h > 0;
    if (!any) return;

    const auto res = resolve_jump_mean_field(ctx, opt_.jump);
    for (std::size_t a = 0; a < A_; ++a) {
      for (std::size_t j = 0; j < res.hits[a]; ++j) {
        const std::size_t p = cand[a][j].second;
        alive_[p] = 0;
        st_.tau[p] = t;
      }
      dead_[a] += res.hits[a];
    }
    const auto applied = ctx.mass(res.hits);
    const auto after = current_losses();
    std::vector<double> inc(k_);
    for (std::size_t l = 0; l < k_; ++l) inc[l] = after[l] - before[l];

    JumpRecord rec;
    rec.time = t;
    rec.step = m;
    rec.delta = applied;
    rec.residual = jump_constraint_residual(ctx, applied);
    rec.stabilized = res.stabilized;
    rec.eps = res.eps;
    const auto diff = ctx.mass(seed_hits);
    for (const auto& atom : pb_.dist.atoms) {
      rec.max_increment = std::max(rec.max_increment, dot(atom.v, inc));
      rec.diffusive = std::max(rec.diffusive, dot(atom.v, diff));
    }
    if (increment) *increment = rec.max_increment;
    st_.jumps.push_back(std::move(rec));

    // Loss feedback.
    for (std::size_t l = 0; l < k_; ++l) G_[l] += ctx.psi_ratio * inc[l];
    for (std::size_t a = 0; a < A_; ++a) {
      const double Fn = std::log1p((1.0 - pb_.R) / Lambda_[a] * dot(pb_.dist.atoms[a].v, G_));
      dF_[a] = Fn - F_[a];
      F_[a] = Fn;
    }
    for (std::size_t p = 0; p < st_.X.size(); ++p)
      if (alive_[p]) st_.X[p] -= dF_[st_.type[p]];
  }

  void record(std::size_t m) {
    const auto c = static_cast<Eigen::Index>(m);
    const auto L = current_losses();
    for (std::size_t l = 0; l < k_; ++l) st_.losses(static_cast<Eigen::Index>(l), c) = L[l];
    for (std::size_t a = 0; a < A_; ++a) {
      const auto r = static_cast<Eigen::Index>(a);
      const double n = static_cast<double>(std::max<std::size_t>(1, st_.type_counts[a]));
      st_.cond_default(r, c) = static_cast<double>(dead_[a]) / n;
      st_.alive_fraction(r, c) = static_cast<double>(st_.type_counts[a] - dead_[a]) / n;
      st_.F(r, c) = F_[a];
    }
    if (opt_.hist_bins > 0 && (m % std::max<std::size_t>(1, opt_.hist_every) == 0 || m == grid_.steps())) {
      DensitySnapshot snap;
      snap.time = grid_[m];
      snap.mass.assign(A_, std::vector<double>(opt_.hist_bins, 0.0));
      std::vector<std::vector<std::size_t>> counts(A_, std::vector<std::size_t>(opt_.hist_bins, 0));
      const double w = opt_.hist_max / static_cast<double>(opt_.hist_bins);
      for (std::size_t p = 0; p < st_.X.size(); ++p) {
        if (!alive_[p] || st_.X[p] < 0.0 || st_.X[p] >= opt_.hist_max) continue;
        const auto b = std::min(opt_.hist_bins - 1, static_cast<std::size_t>(st_.X[p] / w));
        ++counts[st_.type[p]][b];
      }
      for (std::size_t a = 0; a < A_; ++a)
        for (std::size_t b = 0; b < opt_.hist_bins; ++b)
          snap.mass[a][b] = st_.type_counts[a]
                                ? static_cast<double>(counts[a][b]) /
                                      static_cast<double>(st_.type_counts[a])
                                : 0.0;
      st_.density.push_back(std::move(snap));
    }
  }

  const MeanFieldProblem& pb_;
  std::span<const double> B0_;
  const TimeGrid& grid_;
  const MeanFieldOptions& opt_;
  std::size_t A_, k_;
  MeanFieldState st_;
  std::vector<char> alive_;
  std::vector<std::size_t> dead_;
  std::vector<double> Lambda_;
  std::vector<double> G_;
  std::vector<double> F_;
  std::vector<double> dF_ = std::vector<double>(A_, 0.0);
};

}  // namespace

MeanFieldState solve_mean_field(const MeanFieldProblem& problem, std::span<const double> B0,
                                const TimeGrid& grid, const MeanFieldOptions& options) {
  return MeanFieldSolver(problem, B0, grid, options).run();
}

}  // namespace contagion
