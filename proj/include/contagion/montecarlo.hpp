#pragma once

#include <cstddef>
#include <exception>
#include <vector>

#include <omp.h>

namespace contagion {

// Runs fn(s) for s in [0, count) and stores the results in scenario order.
// Each scenario owns its seeds, so the output does not depend on workers.
template <class Fn>
auto run_scenarios(std::size_t count, int workers, Fn&& fn) -> std::vector<decltype(fn(std::size_t{}))> {
  std::vector<decltype(fn(std::size_t{}))> out(count);
  std::exception_ptr err;
  const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(count); ++s) {
    try {
      out[static_cast<std::size_t>(s)] = fn(static_cast<std::size_t>(s));
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return out;
}

template <class Fn>
auto run_scenarios_serial(std::size_t count, Fn&& fn) -> std::vector<decltype(fn(std::size_t{}))> {
  std::vector<decltype(fn(std::size_t{}))> out(count);
  for (std::size_t s = 0; s < count; ++s) out[s] = fn(s);
  return out;
}

}  // namespace contagion
