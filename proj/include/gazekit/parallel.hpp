#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gazekit {

// Number of fixed reduction lanes. Floating-point reductions are always
// accumulated per lane and folded in lane order, so results are bit-identical
// for any thread count (including 1).
inline constexpr int kLanes = 8;

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

/// Run fn(i) for i in [0, n) across threads; iterations must be independent.
template <typename Fn>
void parallel_for(std::ptrdiff_t n, Fn&& fn) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
}

/// Split [0, n) into kLanes contiguous blocks and run fn(lane, begin, end)
/// for each. The partition is independent of the thread count.
template <typename Fn>
void parallel_lanes(std::ptrdiff_t n, Fn&& fn) {
  const std::ptrdiff_t chunk = (n + kLanes - 1) / kLanes;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int lane = 0; lane < kLanes; ++lane) {
    const std::ptrdiff_t begin = lane * chunk;
    const std::ptrdiff_t end = begin + chunk < n ? begin + chunk : n;
    if (begin < end) fn(lane, begin, end);
  }
}

}  // namespace gazekit
