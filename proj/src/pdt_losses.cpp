#include "trav/pdt_losses.hpp"

#include <cmath>
#include <stdexcept>

#include "trav/math_util.hpp"
#include "trav/parallel.hpp"

namespace trav {

void PerspectiveConfig::validate() const {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
        throw std::invalid_argument("PerspectiveConfig: gamma must be >= 0");
    }
    if (!(alpha_fp > 0.0) || !(alpha_fn > 0.0)) {
        throw std::invalid_argument("PerspectiveConfig: alpha_fp and alpha_fn must be > 0");
    }
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("PerspectiveConfig: epsilon must be > 0");
    }
}

HypothesisSet::HypothesisSet(std::array<DenseMap, 3> logit_maps,
                             std::array<PerspectiveConfig, 3> cfgs)
    : logits(std::move(logit_maps)), configs(cfgs) {
    require_same_shape(logits[0], logits[1], "HypothesisSet");
    require_same_shape(logits[0], logits[2], "HypothesisSet");
    for (const auto& c : configs) {
        c.validate();
    }
}

std::array<PerspectiveConfig, 3> default_perspectives() {
    return {PerspectiveConfig{0.2, 3.0, 0.3, 1e-6},   // conservative
            PerspectiveConfig{0.5, 1.0, 1.0, 1e-6},   // neutral
            PerspectiveConfig{0.8, 0.3, 3.0, 1e-6}};  // aggressive
}

LossResult focal_loss(const DenseMap& logits, const UnitIntervalMap& labels, double gamma,
                      LossReduction reduction) {
    require_same_shape(logits, labels.map(), "focal_loss");
    require_binary(labels, "focal_loss");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
        throw std::invalid_argument("focal_loss: gamma must be >= 0");
    }

    const int height = logits.height();
    const int width = logits.width();
    const double scale =
        reduction == LossReduction::mean ? 1.0 / static_cast<double>(logits.size()) : 1.0;

    std::vector<double> grad(logits.size(), 0.0);
    const auto mv = logits.values();
    const auto yv = labels.map().values();
    const double total = sum_rows(height, [&](int v) {
        double row = 0.0;
        const std::size_t base = static_cast<std::size_t>(v) * width;
        for (int u = 0; u < width; ++u) {
            const std::size_t i = base + u;
            const double s = yv[i] > 0.5 ? 1.0 : -1.0;
            const double z = s * mv[i];
            const double log_pt = log_sigmoid(z);
            const double pt = sigmoid(z);
            const double one_minus_pt = sigmoid(-z);
            // (1-p_t)^gamma, evaluated in log space so extreme logits stay finite
            const double w = gamma == 0.0 ? 1.0 : std::exp(gamma * log_sigmoid(-z));
            row += -w * log_pt;
            // d/dlogit of -(1-p_t)^gamma log p_t, factored to avoid overflow:
            //   s * [gamma (1-p_t)^gamma p_t log p_t - (1-p_t)^(gamma+1)]
            grad[i] = scale * s * (gamma * w * pt * log_pt - w * one_minus_pt);
        }
        return row;
    });
    return LossResult{total * scale,
                      DenseMap::from_values(height, width, std::move(grad))};
}

LossResult tversky_loss(const DenseMap& logits, const UnitIntervalMap& labels,
                        const PerspectiveConfig& config) {
    require_same_shape(logits, labels.map(), "tversky_loss");
    require_binary(labels, "tversky_loss");
    config.validate();

    const int height = logits.height();
    const int width = logits.width();
    const auto mv = logits.values();
    const auto yv = labels.map().values();

    // soft confusion counts, per-row partials accumulated in row order
    std::vector<double> tp_row(height, 0.0);
    std::vector<double> fp_row(height, 0.0);
    std::vector<double> fn_row(height, 0.0);
    parallel_rows(height, [&](int v) {
        double tp = 0.0, fp = 0.0, fn = 0.0;
        const std::size_t base = static_cast<std::size_t>(v) * width;
        for (int u = 0; u < width; ++u) {
            const std::size_t i = base + u;
            const double p = sigmoid(mv[i]);
            const double y = yv[i];
            tp += p * y;
            fp += p * (1.0 - y);
            fn += (1.0 - p) * y;
        }
        tp_row[v] = tp;
        fp_row[v] = fp;
        fn_row[v] = fn;
    });
    double tp = 0.0, fp = 0.0, fn = 0.0;
    for (int v = 0; v < height; ++v) {
        tp += tp_row[v];
        fp += fp_row[v];
        fn += fn_row[v];
    }

    const double num = tp + config.epsilon;
    const double den = tp + config.alpha_fp * fp + config.alpha_fn * fn + config.epsilon;
    const double loss = 1.0 - num / den;

    // quotient rule through the soft counts
    const double den2 = den * den;
    const double d_tp = (num - den) / den2;
    const double d_fp = num * config.alpha_fp / den2;
    const double d_fn = num * config.alpha_fn / den2;
    std::vector<double> grad(logits.size());
    parallel_rows(height, [&](int v) {
        const std::size_t base = static_cast<std::size_t>(v) * width;
        for (int u = 0; u < width; ++u) {
            const std::size_t i = base + u;
            const double dp = sigmoid(mv[i]) * sigmoid(-mv[i]);
            const double y = yv[i];
            grad[i] = (d_tp * y + d_fp * (1.0 - y) - d_fn * y) * dp;
        }
    });
    return LossResult{loss, DenseMap::from_values(height, width, std::move(grad))};
}

PdtLossResult pdt_loss(const HypothesisSet& hypotheses, const UnitIntervalMap& labels,
                       LossReduction reduction) {
    require_same_shape(hypotheses.logits[0], labels.map(), "pdt_loss");

    std::array<double, 3> per_token{};
    std::array<DenseMap, 3> grads{DenseMap(1, 1, 0.0), DenseMap(1, 1, 0.0), DenseMap(1, 1, 0.0)};
    double total = 0.0;
    for (int k = 0; k < 3; ++k) {
        const auto& cfg = hypotheses.configs[k];
        LossResult focal = focal_loss(hypotheses.logits[k], labels, cfg.gamma, reduction);
        LossResult tversky = tversky_loss(hypotheses.logits[k], labels, cfg);
        per_token[k] = focal.value + tversky.value;
        total += per_token[k];
        grads[k] = elementwise(focal.grad, tversky.grad, ElemOp::add);
    }
    return PdtLossResult{total, per_token, std::move(grads)};
}

}  // namespace trav
