#include "lstmcov/runtime.hpp"

#include <cstdlib>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace lstmcov {

void tune_allocator() {
#if defined(__GLIBC__)
    constexpr int keep = 32 << 20;  // glibc's ceiling for the mmap threshold
    mallopt(M_MMAP_THRESHOLD, keep);
    mallopt(M_TRIM_THRESHOLD, keep);
#endif
}

} // namespace lstmcov
