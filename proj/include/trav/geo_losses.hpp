#pragma once

#include "trav/dense_map.hpp"

namespace trav {

struct GeoLossWeights {
    double lambda_slope = 1.0;
    double lambda_elev = 1.0;
    double lambda_geo = 2.0;

    void validate() const;
};

struct SmoothL1Result {
    double value;
    double slope_term;  // unweighted per-channel means
    double elev_term;
    DenseMap grad_slope;
    DenseMap grad_elev;
};

// lambda_slope * mean(SmoothL1(pred_slope - pseudo_slope))
//   + lambda_elev * mean(SmoothL1(pred_elev - pseudo_elev)),
// with the Huber transition at |e| = 1.
SmoothL1Result smooth_l1_geo(const DenseMap& pred_slope, const DenseMap& pred_elev,
                             const DenseMap& pseudo_slope, const DenseMap& pseudo_elev,
                             const GeoLossWeights& weights);

struct AffineAlignment {
    double scale = 1.0;
    double shift = 0.0;
    bool degenerate = false;  // constant prediction; fallback scale=1, shift=mean difference
};

// Closed-form least squares for min_{s,t} ||s*predicted + t - teacher||^2.
AffineAlignment align_least_squares(const DenseMap& predicted, const DenseMap& teacher);

struct SsiResult {
    double value;
    DenseMap grad;  // d(loss)/d(predicted), with (s, t) differentiated through
    AffineAlignment alignment;
};

// mean |s*predicted + t - teacher| after least-squares alignment.
SsiResult ssi_loss(const DenseMap& predicted, const DenseMap& teacher);

}  // namespace trav
