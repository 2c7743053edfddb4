#pragma once

#include <cstddef>
#include <functional>

namespace voxelpaint {

/// Worker cap for internal kernels. Initialized from VOXELPAINT_THREADS
/// (default 1); every kernel partitions work so results do not depend on it.
int num_threads();
void set_num_threads(int threads);

/// Runs body(i) for i in [0, count). Each index must write disjoint output.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace voxelpaint
