#ifndef MRFSEG_PARALLEL_HPP
#define MRFSEG_PARALLEL_HPP

#include <cstdint>
#include <functional>

// Deterministic data parallelism: the index range is split into contiguous
// chunks, one per worker, so results are independent of scheduling as long as
// workers write disjoint outputs. Worker count is min(hardware, MRFSEG_THREADS
// if set); MRFSEG_THREADS=1 forces serial execution.

namespace mrfseg {

int worker_count();

/// Runs fn(i) for i in [begin, end). fn must only write state owned by index i.
void parallel_for(std::int64_t begin, std::int64_t end,
                  const std::function<void(std::int64_t)>& fn);

}  // namespace mrfseg

#endif
