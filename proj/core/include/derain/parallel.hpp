#pragma once

#include <functional>

namespace derain {

/// Worker thread cap: DERAIN_THREADS when set (min 1), otherwise the
/// number of logical cores. Read once per process.
int worker_threads();

/// Runs fn(i) for i in [begin, end) on the shared pool. Partitioning is a
/// pure function of the range and pool size, and every index is computed
/// by exactly one worker, so results do not depend on scheduling. Nested
/// calls and ranges below `grain` run inline on the caller.
void parallel_for(int begin, int end, const std::function<void(int)>& fn,
                  int grain = 2);

}  // namespace derain
