#include "vlaudit/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vlaudit {

namespace {
#ifdef _OPENMP
const int kStartupThreads = omp_get_max_threads();
#else
const int kStartupThreads = 1;
#endif
int default_threads() { return kStartupThreads; }
}  // namespace

void set_thread_count(int n) {
#ifdef _OPENMP
    omp_set_num_threads(n > 0 ? n : default_threads());
#else
    (void)n;
#endif
}

int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return default_threads();
#endif
}

}  // namespace vlaudit
