#include "attnmask/parallel.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace attnmask {

void set_jobs(int n) {
#if defined(_OPENMP)
  if (n > 0) {
    omp_set_dynamic(0);
    omp_set_num_threads(n);
  }
#else
  (void)n;
#endif
}

int jobs() {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace attnmask
