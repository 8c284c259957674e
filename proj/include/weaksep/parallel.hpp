#pragma once

#include <functional>

namespace weaksep {

/// Caps worker threads for all parallel loops. n <= 0 restores the default
/// (WEAKSEP_THREADS env var if set, else hardware concurrency).
void set_max_threads(int n);
int max_threads();

/// Runs body(i) for i in [begin, end). Iterations must be independent and
/// write only to their own output slots, so results do not depend on the
/// thread count. Nested calls run serially.
void parallel_for(int begin, int end, const std::function<void(int)>& body);

}  // namespace weaksep
