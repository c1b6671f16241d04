#pragma once

#include "geomancer/common.hpp"

#include <omp.h>

#include <exception>

namespace geomancer {

/// Sets the worker count for all data-parallel loops (0 keeps the runtime default).
inline void set_thread_count(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

inline int thread_count() { return omp_get_max_threads(); }

/// Runs body(i) for i in [0, n). Iterations must write disjoint outputs. If
/// iterations throw, the exception from the lowest index is rethrown after
/// the loop.
template <typename Body>
void parallel_for(Index n, Body&& body) {
  std::exception_ptr error;
  Index error_index = n;
#pragma omp parallel for schedule(dynamic, 64)
  for (Index i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
#pragma omp critical(geomancer_parallel_error)
      if (i < error_index) {
        error_index = i;
        error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
}

// Row-chunked reductions. The chunk size is fixed so the summation order,
// and therefore the rounding, does not depend on the number of threads.
inline constexpr Index kReductionChunk = 4096;

/// A^T B for tall A and B, deterministic in the thread count.
inline Matrix gram(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b) {
  const Index rows = a.rows();
  const Index chunks = (rows + kReductionChunk - 1) / kReductionChunk;
  if (chunks <= 1) return a.transpose() * b;
  std::vector<Matrix> partial(static_cast<std::size_t>(chunks));
  parallel_for(chunks, [&](Index c) {
    const Index begin = c * kReductionChunk;
    const Index len = std::min(kReductionChunk, rows - begin);
    partial[static_cast<std::size_t>(c)] =
        a.middleRows(begin, len).transpose() * b.middleRows(begin, len);
  });
  Matrix out = partial.front();
  for (std::size_t c = 1; c < partial.size(); ++c) out += partial[c];
  return out;
}

/// A * C for tall A and small C, split across row chunks.
inline Matrix tall_times(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& c) {
  Matrix out(a.rows(), c.cols());
  const Index rows = a.rows();
  const Index chunks = (rows + kReductionChunk - 1) / kReductionChunk;
  parallel_for(chunks, [&](Index ch) {
    const Index begin = ch * kReductionChunk;
    const Index len = std::min(kReductionChunk, rows - begin);
    out.middleRows(begin, len).noalias() = a.middleRows(begin, len) * c;
  });
  return out;
}

}  // namespace geomancer
