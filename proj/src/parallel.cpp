#include "mfglab/parallel.hpp"

#include <atomic>

namespace mfglab {

namespace {
std::atomic<int> g_workers{0};
}

void set_worker_count(int workers) { g_workers.store(workers < 0 ? 0 : workers); }

int worker_count() { return g_workers.load(); }

}  // namespace mfglab
