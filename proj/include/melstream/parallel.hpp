// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <functional>

namespace melstream {

// Worker count: MELSTREAM_THREADS if set (>= 1), otherwise hardware concurrency.
std::size_t worker_count();

// Runs fn(i) for i in [0, n) on up to worker_count() threads. Each index is
// handled by exactly one call; callers must write results to per-index slots
// and reduce in index order to stay reproducible across thread counts.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace melstream
