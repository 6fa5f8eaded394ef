#pragma once

#include "trav/dense_map.hpp"

namespace trav {

// The full per-pixel output tuple: semantic mean, confidence, risks, fused
// score, and the raw inter-token variance.
struct TraversabilityOutput {
    UnitIntervalMap mean_p;
    UnitIntervalMap confidence;
    UnitIntervalMap slope_risk;
    UnitIntervalMap elevation_risk;
    UnitIntervalMap score;
    DenseMap variance;
};

// T = C * P * (1 - (R_slope + R_elev)/2), per pixel.
UnitIntervalMap fuse(const UnitIntervalMap& confidence, const UnitIntervalMap& mean_p,
                     const UnitIntervalMap& slope_risk, const UnitIntervalMap& elevation_risk);

// L = sem + lambda_geo * (geo + distill).
double total_loss(double sem, double geo, double distill, double lambda_geo);

}  // namespace trav
