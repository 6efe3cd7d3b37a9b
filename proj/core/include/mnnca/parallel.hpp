// SPDX-License-Identifier: Apache-2.0
//
// Tiny fixed worker pool. All engine parallelism is over disjoint output
// ranges, and every reduction combines fixed-size blocks in index order, so
// results are bit-identical for any worker count. MNNCA_THREADS caps the
// pool size.

#pragma once

#include <cstdint>
#include <functional>

namespace mnnca {

// Current engine thread cap (>= 1).
int engine_threads();

// Override the cap (tests use this; 0 restores the environment default).
void set_engine_threads(int n);

// Runs fn(begin, end) over [0, n) split into at most engine_threads()
// contiguous chunks. fn must only write locations owned by its range.
void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace mnnca
