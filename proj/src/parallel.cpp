#include "holodisc/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace holodisc {

namespace {

std::atomic<bool> g_sequential{false};

int env_threads() {
  static const int cached = [] {
    int hw = 1;
#ifdef _OPENMP
    hw = omp_get_num_procs();
#endif
    if (const char* env = std::getenv("HOLODISC_THREADS")) {
      try {
        int requested = std::stoi(env);
        if (requested >= 1 && requested < hw) return requested;
      } catch (...) {
      }
    }
    return hw;
  }();
  return cached;
}

}  // namespace

int thread_count() { return g_sequential.load() ? 1 : env_threads(); }

void force_sequential(bool on) { g_sequential.store(on); }

}  // namespace holodisc
