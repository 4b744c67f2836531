#pragma once

#include <cstddef>
#include <functional>

namespace slowfast {

/// Worker count to use: `requested` if positive, else SLOWFAST_WORKERS from
/// the environment, else 1.
int resolve_workers(int requested = 0);

/// Runs body(i) for i in [0, count) on up to `workers` threads. Each index
/// is processed exactly once. If any call throws, the exception from the
/// smallest failing index is rethrown after all workers stop, so the error
/// reported does not depend on scheduling.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body);

}  // namespace slowfast
