#pragma once

#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace aoplab::parallel {

inline int max_workers() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

/// workers <= 0 means "let the runtime decide".
inline int resolve_workers(int workers) { return workers > 0 ? workers : max_workers(); }

/// Runs fn(i) for i in [0, n) on `workers` threads. If any call throws, the
/// exception from the lowest index is rethrown once all workers finished, so
/// the reported failure does not depend on scheduling.
template <typename Fn>
void for_each_index(std::size_t n, int workers, Fn&& fn) {
  std::exception_ptr first_error;
  std::size_t first_index = std::numeric_limits<std::size_t>::max();
  std::mutex mu;
  const auto count = static_cast<long long>(n);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1) num_threads(resolve_workers(workers))
#endif
  for (long long i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(mu);
      if (static_cast<std::size_t>(i) < first_index) {
        first_index = static_cast<std::size_t>(i);
        first_error = std::current_exception();
      }
    }
  }
  (void)workers;
  if (first_error) std::rethrow_exception(first_error);
}

/// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (!std::isfinite(t)) {
      // infinities and NaN propagate without compensation
      sum_ = t;
      comp_ = 0.0;
      return;
    }
    if ((sum_ >= 0 ? sum_ : -sum_) >= (x >= 0 ? x : -x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  [[nodiscard]] double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace aoplab::parallel
