#pragma once

#include <cstddef>
#include <functional>

namespace shadow_ode {

/// Worker cap for ladder-level parallelism: SHADOW_ODE_THREADS when set, otherwise the
/// hardware concurrency. set_worker_limit overrides both (0 restores the default).
std::size_t worker_limit();
void set_worker_limit(std::size_t limit);

/// Runs fn(0..count-1) on up to worker_limit() threads; rethrows the exception of the
/// lowest failing index.
/// Results must not depend on scheduling: each index owns its output slot.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace shadow_ode
