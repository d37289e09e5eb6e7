#ifndef DCP_TRIAL_POOL_HPP
#define DCP_TRIAL_POOL_HPP

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dcp {

// Independent-trial fan-out used by the Monte-Carlo runners, the PPSC property
// checkers and multi-start restarts. Each trial derives its own generator from
// a pre-assigned key and writes to its own slot, so the OpenMP path and the
// serial reference path produce identical results; tests assert this and the
// bench target compares their wall time.
enum class Execution { Serial, Parallel };

inline bool openmp_enabled() {
#ifdef _OPENMP
    return true;
#else
    return false;
#endif
}

template <typename Fn>
void run_trials(int count, Execution mode, Fn&& body) {
    if (mode == Execution::Parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
        for (int t = 0; t < count; ++t) body(t);
        return;
#endif
    }
    for (int t = 0; t < count; ++t) body(t);
}

}  // namespace dcp

#endif
