#include "flowfusion/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace flowfusion {

void set_worker_threads(int n) {
  if (n < 1) return;
#ifdef _OPENMP
  omp_set_num_threads(n);
#endif
}

int apply_thread_env() {
  const char* env = std::getenv("FLOWFUSION_THREADS");
  if (env == nullptr) return 0;
  try {
    const int n = std::stoi(env);
    if (n < 1) return 0;
    set_worker_threads(n);
    return n;
  } catch (...) {
    return 0;
  }
}

int worker_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace flowfusion
