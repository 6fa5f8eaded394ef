#pragma once

#include <array>

#include "trav/dense_map.hpp"

namespace trav {

// Per-token perspective: focal exponent plus asymmetric Tversky weights.
struct PerspectiveConfig {
    double gamma = 0.5;
    double alpha_fp = 1.0;
    double alpha_fn = 1.0;
    double epsilon = 1e-6;

    void validate() const;
};

enum class LossReduction { mean, sum };

// Three logit maps in fixed order: conservative, neutral, aggressive.
struct HypothesisSet {
    std::array<DenseMap, 3> logits;
    std::array<PerspectiveConfig, 3> configs;

    HypothesisSet(std::array<DenseMap, 3> logit_maps, std::array<PerspectiveConfig, 3> cfgs);

    int height() const { return logits[0].height(); }
    int width() const { return logits[0].width(); }
};

inline constexpr int kConservative = 0;
inline constexpr int kNeutral = 1;
inline constexpr int kAggressive = 2;

std::array<PerspectiveConfig, 3> default_perspectives();

struct LossResult {
    double value;
    DenseMap grad;  // d(loss)/d(logit), per pixel
};

// -(1-p_t)^gamma * log(p_t) with p_t = sigmoid(logit) for label 1 and
// sigmoid(-logit) for label 0; reduced over pixels.
LossResult focal_loss(const DenseMap& logits, const UnitIntervalMap& labels, double gamma,
                      LossReduction reduction = LossReduction::mean);

// 1 - (TP+eps) / (TP + alpha_fp*FP + alpha_fn*FN + eps) over soft counts
// TP = sum p*y, FP = sum p*(1-y), FN = sum (1-p)*y with p = sigmoid(logit).
LossResult tversky_loss(const DenseMap& logits, const UnitIntervalMap& labels,
                        const PerspectiveConfig& config);

struct PdtLossResult {
    double total;
    std::array<double, 3> per_token;
    std::array<DenseMap, 3> grads;
};

// L_k = focal(gamma_k) + tversky(alpha_fp_k, alpha_fn_k); total is the plain
// sum over the three tokens. Each token's gradient depends only on its own logits.
PdtLossResult pdt_loss(const HypothesisSet& hypotheses, const UnitIntervalMap& labels,
                       LossReduction reduction = LossReduction::mean);

}  // namespace trav
