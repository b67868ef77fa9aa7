#pragma once

#include <cstddef>
#include <functional>

namespace segadv::harness {

// Runs job(i) for i in [0, n) on at most `workers` threads (1 = inline).
// Jobs write to their own slot; if any job throws, the exception of the
// lowest failing index is rethrown after all workers finish.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job);

}  // namespace segadv::harness
