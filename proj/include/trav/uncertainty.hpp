#pragma once

#include <utility>

#include "trav/dense_map.hpp"
#include "trav/pdt_losses.hpp"

namespace trav {

struct UncertaintyOutput {
    UnitIntervalMap mean_p;
    DenseMap variance;  // population variance of the three sigmoided masks, in [0, 2/9]
    UnitIntervalMap confidence;
    double alpha;
    double epsilon;
};

// Per-pixel mean and population variance (divide by N_s = 3) of the
// sigmoided hypothesis masks.
std::pair<UnitIntervalMap, DenseMap> mean_and_variance(const HypothesisSet& hypotheses);

// C = 1 - alpha * variance / (max(variance) + epsilon). An identically-zero
// variance map yields C = 1 everywhere.
UnitIntervalMap confidence_from_variance(const DenseMap& variance, double alpha, double epsilon);

UncertaintyOutput estimate_uncertainty(const HypothesisSet& hypotheses, double alpha,
                                       double epsilon);

}  // namespace trav
