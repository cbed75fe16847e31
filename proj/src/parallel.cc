#include "parallel.h"

#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

namespace drf::internal {

void ParallelFor(int count, int threads, const std::function<void(int)>& body) {
  if (threads <= 1 || count <= 1) {
    for (int k = 0; k < count; ++k) body(k);
    return;
  }
  tbb::task_arena arena(threads);
  arena.execute([&] { tbb::parallel_for(0, count, [&](int k) { body(k); }); });
}

}  // namespace drf::internal
