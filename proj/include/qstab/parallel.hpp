#pragma once

#include <functional>

namespace qstab::par {

// Worker cap from the QSTAB_THREADS environment variable; defaults to 1 so
// runs are sequential unless the user opts in. Clamped to [1, 64].
int thread_count();

// Runs fn(0..n-1) with at most thread_count() workers. Callers must write
// results indexed by i; the schedule never affects output content.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace qstab::par
