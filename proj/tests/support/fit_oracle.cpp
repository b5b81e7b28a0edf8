#include "fit_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <ceres/ceres.h>

namespace oracle {

namespace {

struct EntryResidual {
  EntryResidual(double target, int k) : target(target), k(k) {}
  template <typename T>
  bool operator()(T const* const* p, T* r) const {
    T s(0.0);
    for (int l = 0; l < k; ++l) s += p[0][l] * p[1][l];
    r[0] = s - target;
    return true;
  }
  double target;
  int k;
};

}  // namespace

double multistart_fit_residual(const Eigen::MatrixXd& L, std::size_t k, std::size_t restarts,
                               std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(L.rows());
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double scale = std::sqrt(std::max(L.maxCoeff(), 1e-12));
  double best = std::numeric_limits<double>::infinity();

  for (std::size_t r = 0; r < restarts; ++r) {
    std::vector<std::vector<double>> u(n, std::vector<double>(k)), v(n, std::vector<double>(k));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t l = 0; l < k; ++l) u[i][l] = scale * U(gen), v[i][l] = scale * U(gen);

    ceres::Problem problem;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        auto* cost = new ceres::DynamicAutoDiffCostFunction<EntryResidual, 4>(
            new EntryResidual(L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), static_cast<int>(k)));
        cost->AddParameterBlock(static_cast<int>(k));
        cost->AddParameterBlock(static_cast<int>(k));
        cost->SetNumResiduals(1);
        problem.AddResidualBlock(cost, nullptr, u[i].data(), v[j].data());
      }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t l = 0; l < k; ++l) {
        if (problem.HasParameterBlock(u[i].data())) problem.SetParameterLowerBound(u[i].data(), static_cast<int>(l), 0.0);
        if (problem.HasParameterBlock(v[i].data())) problem.SetParameterLowerBound(v[i].data(), static_cast<int>(l), 0.0);
      }

    ceres::Solver::Options opt;
    opt.max_num_iterations = 2000;
    opt.function_tolerance = 1e-16;
    opt.gradient_tolerance = 1e-16;
    opt.parameter_tolerance = 1e-16;
    opt.linear_solver_type = ceres::DENSE_QR;
    ceres::Solver::Summary summary;
    ceres::Solve(opt, &problem, &summary);

    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        double s = 0.0;
        for (std::size_t l = 0; l < k; ++l) s += u[i][l] * v[j][l];
        const double e = L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - s;
        res += e * e;
      }
    best = std::min(best, res);
  }
  return best;
}

}  // namespace oracle
