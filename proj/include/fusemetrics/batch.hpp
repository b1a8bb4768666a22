#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "fusemetrics/metrics.hpp"

namespace fusemetrics {

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Each index is
/// processed exactly once; callers write results into index-addressed slots,
/// so the outcome does not depend on the worker count. The first exception
/// thrown by fn is rethrown after all workers stop.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

/// eval_all over a batch; result i belongs to triples[i].
std::vector<metrics::MetricVector> eval_batch(std::span<const metrics::FusionTriple> triples,
                                              const metrics::VanillaWeights& w, int workers);

}  // namespace fusemetrics
