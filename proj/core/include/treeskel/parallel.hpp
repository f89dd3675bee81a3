// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace treeskel {

/// Caps the worker count used by parallel_for. 0 selects hardware concurrency.
void set_max_threads(std::size_t n);
std::size_t max_threads();

/// Calls fn(i) for every i in [0, n). Work is split into contiguous chunks;
/// callers must only write to slots owned by i so results do not depend on
/// the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace treeskel
