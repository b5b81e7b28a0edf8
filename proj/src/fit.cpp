#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "contagion/error.hpp"
#include "contagion/network.hpp"
#include "contagion/rng.hpp"

namespace contagion {

namespace {

struct Factors {
  Eigen::MatrixXd U;
  Eigen::MatrixXd V;
};

double masked_residual(const Eigen::MatrixXd& R) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < R.cols(); ++j)
    for (Eigen::Index i = 0; i < R.rows(); ++i)
      if (i != j) s += R(i, j) * R(i, j);
  return s;
}

// One sweep of exact projected coordinate minimisation over all entries of
// U then V. R holds L - U V^T and is kept in sync; its diagonal is ignored.
void sweep(Factors& f, Eigen::MatrixXd& R) {
  const Eigen::Index n = R.rows();
  const Eigen::Index k = f.U.cols();
  for (Eigen::Index l = 0; l < k; ++l) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double num = 0.0, den = 0.0;
      const double old = f.U(i, l);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double vj = f.V(j, l);
        num += (R(i, j) + old * vj) * vj;
        den += vj * vj;
      }
      const double upd = den > 0.0 ? std::max(0.0, num / den) : 0.0;
      const double d = upd - old;
      if (d != 0.0) {
        for (Eigen::Index j = 0; j < n; ++j) R(i, j) -= d * f.V(j, l);
        f.U(i, l) = upd;
      }
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      double num = 0.0, den = 0.0;
      const double old = f.V(j, l);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (i == j) continue;
        const double ui = f.U(i, l);
        num += (R(i, j) + old * ui) * ui;
        den += ui * ui;
      }
      const double upd = den > 0.0 ? std::max(0.0, num / den) : 0.0;
      const double d = upd - old;
      if (d != 0.0) {
        for (Eigen::Index i = 0; i < n; ++i) R(i, j) -= d * f.U(i, l);
        f.V(j, l) = upd;
      }
    }
  }
}

std::vector<TypeVector> to_types(const Factors& f) {
  std::vector<TypeVector> out(static_cast<std::size_t>(f.U.rows()));
  for (Eigen::Index i = 0; i < f.U.rows(); ++i) {
    auto& t = out[static_cast<std::size_t>(i)];
    t.u.resize(static_cast<std::size_t>(f.U.cols()));
    t.v.resize(static_cast<std::size_t>(f.U.cols()));
    for (Eigen::Index l = 0; l < f.U.cols(); ++l) {
      t.u[static_cast<std::size_t>(l)] = f.U(i, l);
      t.v[static_cast<std::size_t>(l)] = f.V(i, l);
    }
  }
  return out;
}

}  // namespace

double off_diagonal_residual(const Eigen::MatrixXd& L, std::span<const TypeVector> types) {
  if (static_cast<std::size_t>(L.rows()) != types.size() || L.rows() != L.cols())
    throw DimensionMismatch("matrix and factor list sizes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < types.size(); ++i)
    for (std::size_t j = 0; j < types.size(); ++j) {
      if (i == j) continue;
      const double r = L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) -
                       dot(types[i].u, types[j].v);
      s += r * r;
    }
  return s;
}

LowRankFit fit_low_rank(const Eigen::MatrixXd& L, std::size_t k, const FitOptions& options) {
  if (L.rows() != L.cols()) throw DimensionMismatch("liability matrix must be square");
  if (k == 0) throw std::invalid_argument("rank must be at least 1");
  const Eigen::Index n = L.rows();
  if (n < 2) throw std::invalid_argument("need at least two banks to fit");
  double mean = 0.0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i == j) continue;
      if (L(i, j) < 0.0 || !std::isfinite(L(i, j)))
        throw std::invalid_argument("liability matrix must be nonnegative and finite");
      mean += L(i, j);
    }
  mean /= static_cast<double>(n * (n - 1));
  const double scale = std::sqrt(std::max(mean, 1e-12) / static_cast<double>(k));

  LowRankFit best;
  best.residual = std::numeric_limits<double>::infinity();
  const std::uint64_t seed = rng::derive_seed(options.seed, rng::kFitRestarts);
  const std::size_t restarts = std::max<std::size_t>(1, options.restarts);

  for (std::size_t r = 0; r < restarts; ++r) {
    Factors f{Eigen::MatrixXd(n, static_cast<Eigen::Index>(k)),
              Eigen::MatrixXd(n, static_cast<Eigen::Index>(k))};
    std::uint64_t c = 0;
    for (Eigen::Index l = 0; l < static_cast<Eigen::Index>(k); ++l)
      for (Eigen::Index i = 0; i < n; ++i) {
        f.U(i, l) = 2.0 * scale * rng::uniform(seed, r, c++);
        f.V(i, l) = 2.0 * scale * rng::uniform(seed, r, c++);
      }
    Eigen::MatrixXd R = L - f.U * f.V.transpose();

    std::vector<double> history;
    double prev = masked_residual(R);
    bool converged = false;
    std::size_t it = 0;
    while (it < options.max_iter) {
      sweep(f, R);
      ++it;
      // Recompute from scratch now and then to stop drift in the running residual.
      if (it % 64 == 0) R = L - f.U * f.V.transpose();
      const double cur = masked_residual(R);
      history.push_back(cur);
      if (prev - cur <= options.tol * std::max(prev, 1.0) || cur <= 1e-28) {
        converged = true;
        break;
      }
      prev = cur;
    }
    std::vector<TypeVector> types = to_types(f);
    const double res = off_diagonal_residual(L, types);
    if (res < best.residual) {
      best.types = std::move(types);
      best.residual = res;
      best.iterations = it;
      best.converged = converged;
      best.history = std::move(history);
    }
  }
  return best;
}

}  // namespace contagion
