#pragma once

#include <functional>
#include <string>

#include "plfam/types.hpp"

namespace plfam {

// Thread cap: min(hardware_concurrency, PLFAM_THREADS if set). At least 1.
int max_threads();

// Runs fn(0..n-1), possibly on several threads. Tasks must write to disjoint
// state. The first exception thrown by a task is rethrown on the caller.
void parallel_for(Index n, const std::function<void(Index)>& fn);

// Shortest round-trip decimal representation of a double.
std::string format_double(double x);

// Standard normal CDF.
double normal_cdf(double x);

}  // namespace plfam
