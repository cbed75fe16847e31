#pragma once

#include <functional>

namespace drf::internal {

// Runs body(0..count-1); serially when threads <= 1.
void ParallelFor(int count, int threads, const std::function<void(int)>& body);

}  // namespace drf::internal
