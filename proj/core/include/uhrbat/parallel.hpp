// Copyright (c) 2026 uhrbat authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace uhrbat {

/// Runs fn(begin, end) over contiguous chunks of [0, n). Callers must write
/// disjoint elements only, so results are bitwise-identical for every thread
/// count, including 1 (which runs inline).
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t, std::size_t)>& fn);

/// Runs the tasks on up to `threads` workers. The first exception (by task
/// index) is rethrown after all tasks finish.
void parallel_invoke(const std::vector<std::function<void()>>& tasks, int threads);

}  // namespace uhrbat
