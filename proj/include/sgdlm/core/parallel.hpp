#pragma once

#include <exception>

namespace sgdlm {

// Runs fn(i) for i in [0, count) across OpenMP threads when available.
// An exception thrown by any iteration is rethrown on the calling thread
// after the loop.
template <typename Index, typename Fn>
void parallel_for(Index count, Fn&& fn) {
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (Index i = 0; i < count; ++i) {
    try {
      fn(i);
    } catch (...) {
#pragma omp critical(sgdlm_parallel_for_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace sgdlm
