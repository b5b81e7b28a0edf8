#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace contagion {

// Piecewise-linear function through (times[i], values[i]); flat outside the knots.
class Tabulated {
 public:
  Tabulated() = default;
  Tabulated(std::vector<double> times, std::vector<double> values)
      : times_(std::move(times)), values_(std::move(values)) {
    if (times_.empty() || times_.size() != values_.size())
      throw std::invalid_argument("tabulated function needs matching, non-empty knots");
    for (std::size_t i = 1; i < times_.size(); ++i)
      if (!(times_[i] > times_[i - 1]))
        throw std::invalid_argument("tabulated knots must be strictly increasing");
  }

  double operator()(double t) const {
    if (t <= times_.front()) return values_.front();
    if (t >= times_.back()) return values_.back();
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const std::size_t hi = static_cast<std::size_t>(it - times_.begin());
    const std::size_t lo = hi - 1;
    const double w = (t - times_[lo]) / (times_[hi] - times_[lo]);
    return (1.0 - w) * values_[lo] + w * values_[hi];
  }

  std::span<const double> times() const noexcept { return times_; }
  std::span<const double> values() const noexcept { return values_; }

 private:
  std::vector<double> times_;
  std::vector<double> values_;
};

}  // namespace contagion
