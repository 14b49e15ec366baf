#pragma once

#include <cstdint>
#include <exception>
#include <utility>

#ifdef MFGLAB_HAVE_OPENMP
#include <omp.h>
#endif

namespace mfglab {

// Worker count used by path-parallel loops. 1 = serial reference path
// (plain loop, no OpenMP region); 0 = OpenMP default; n>1 = n threads.
void set_worker_count(int workers);
int worker_count();

// Runs fn(i) for i in [0, count). Bodies must write only to slots owned by
// index i; aggregation happens after the loop in index order, so results do
// not depend on the schedule. First exception is rethrown on the caller.
template <class Fn>
void parallel_for_index(std::int64_t count, Fn&& fn) {
  const int workers = worker_count();
  if (workers == 1 || count <= 1) {
    for (std::int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
#ifdef MFGLAB_HAVE_OPENMP
  std::exception_ptr first_error = nullptr;
  if (workers == 0) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < count; ++i) {
      try {
        fn(i);
      } catch (...) {
#pragma omp critical
        if (!first_error) first_error = std::current_exception();
      }
    }
  } else {
#pragma omp parallel for schedule(static) num_threads(workers)
    for (std::int64_t i = 0; i < count; ++i) {
      try {
        fn(i);
      } catch (...) {
#pragma omp critical
        if (!first_error) first_error = std::current_exception();
      }
    }
  }
  if (first_error) std::rethrow_exception(first_error);
#else
  for (std::int64_t i = 0; i < count; ++i) fn(i);
#endif
}

}  // namespace mfglab
