#ifndef SPCKD_THREADS_HPP
#define SPCKD_THREADS_HPP

namespace spckd {

// Worker count for batched kernels. Defaults to SPCKD_THREADS if set,
// otherwise the hardware concurrency. Always >= 1.
int thread_count();

// Override the worker count for this process (0 restores the default).
void set_thread_count(int n);

}  // namespace spckd

#endif  // SPCKD_THREADS_HPP
