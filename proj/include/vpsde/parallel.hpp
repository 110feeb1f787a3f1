// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vpsde {

// Deterministic parallel reduction: the index range is cut into fixed-size
// chunks, each chunk is accumulated serially into its own slot, and the slots
// are combined in index order. The result is bitwise identical for any thread
// count (including 1), which keeps the reproducibility contract intact when
// kernels run under OpenMP.
inline constexpr std::int64_t kReductionChunk = 4096;

// Accum must be default-constructible; body(accum, i) folds element i into the
// chunk accumulator; merge(total, part) folds chunk results in index order.
template <class Accum, class Body, class Merge>
Accum chunked_reduce(std::int64_t n, Body&& body, Merge&& merge) {
  const std::int64_t n_chunks = (n + kReductionChunk - 1) / kReductionChunk;
  std::vector<Accum> parts(static_cast<std::size_t>(n_chunks > 0 ? n_chunks : 0));
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < n_chunks; ++c) {
    Accum acc{};
    const std::int64_t lo = c * kReductionChunk;
    const std::int64_t hi = lo + kReductionChunk < n ? lo + kReductionChunk : n;
    for (std::int64_t i = lo; i < hi; ++i) body(acc, i);
    parts[static_cast<std::size_t>(c)] = acc;
  }
  Accum total{};
  for (const Accum& p : parts) merge(total, p);
  return total;
}

// Variant with a per-chunk context factory: ctx = make_ctx() is built once per
// chunk (workspaces, thread scratch), body(acc, ctx, i) folds element i.
template <class Accum, class MakeCtx, class Body, class Merge>
Accum chunked_reduce_ctx(std::int64_t n, MakeCtx&& make_ctx, Body&& body, Merge&& merge) {
  const std::int64_t n_chunks = (n + kReductionChunk - 1) / kReductionChunk;
  std::vector<Accum> parts(static_cast<std::size_t>(n_chunks > 0 ? n_chunks : 0));
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < n_chunks; ++c) {
    Accum acc{};
    auto ctx = make_ctx();
    const std::int64_t lo = c * kReductionChunk;
    const std::int64_t hi = lo + kReductionChunk < n ? lo + kReductionChunk : n;
    for (std::int64_t i = lo; i < hi; ++i) body(acc, ctx, i);
    parts[static_cast<std::size_t>(c)] = acc;
  }
  Accum total{};
  for (const Accum& p : parts) merge(total, p);
  return total;
}

// Parallel loop over independent items (particles, probes); each item writes
// only to its own output slot, so scheduling cannot affect results.
template <class Body>
void parallel_for_index(std::int64_t n, Body&& body) {
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) body(i);
}

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace vpsde
