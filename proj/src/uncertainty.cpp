#include "trav/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "trav/math_util.hpp"
#include "trav/parallel.hpp"

namespace trav {

std::pair<UnitIntervalMap, DenseMap> mean_and_variance(const HypothesisSet& hypotheses) {
    const int height = hypotheses.height();
    const int width = hypotheses.width();
    const auto m0 = hypotheses.logits[0].values();
    const auto m1 = hypotheses.logits[1].values();
    const auto m2 = hypotheses.logits[2].values();

    std::vector<double> mean(m0.size());
    std::vector<double> var(m0.size());
    parallel_rows(height, [&](int v) {
        const std::size_t base = static_cast<std::size_t>(v) * width;
        for (int u = 0; u < width; ++u) {
            const std::size_t i = base + u;
            const double p0 = sigmoid(m0[i]);
            const double p1 = sigmoid(m1[i]);
            const double p2 = sigmoid(m2[i]);
            const double p = (p0 + p1 + p2) / 3.0;
            const double d0 = p0 - p;
            const double d1 = p1 - p;
            const double d2 = p2 - p;
            mean[i] = p;
            var[i] = (d0 * d0 + d1 * d1 + d2 * d2) / 3.0;
        }
    });
    return {UnitIntervalMap(DenseMap::from_values(height, width, std::move(mean))),
            DenseMap::from_values(height, width, std::move(var))};
}

UnitIntervalMap confidence_from_variance(const DenseMap& variance, double alpha, double epsilon) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("confidence_from_variance: alpha must be in [0, 1]");
    }
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("confidence_from_variance: epsilon must be > 0");
    }
    double max_var = 0.0;
    for (double v : variance.values()) {
        if (v < 0.0) {
            throw std::invalid_argument("confidence_from_variance: negative variance");
        }
        max_var = std::max(max_var, v);
    }

    const int height = variance.height();
    const int width = variance.width();
    const auto vv = variance.values();
    std::vector<double> conf(vv.size());
    const double denom = max_var + epsilon;
    parallel_rows(height, [&](int v) {
        const std::size_t base = static_cast<std::size_t>(v) * width;
        for (int u = 0; u < width; ++u) {
            const std::size_t i = base + u;
            conf[i] = 1.0 - alpha * (vv[i] / denom);
        }
    });
    return UnitIntervalMap(DenseMap::from_values(height, width, std::move(conf)));
}

UncertaintyOutput estimate_uncertainty(const HypothesisSet& hypotheses, double alpha,
                                       double epsilon) {
    auto [mean_p, variance] = mean_and_variance(hypotheses);
    UnitIntervalMap confidence = confidence_from_variance(variance, alpha, epsilon);
    return UncertaintyOutput{std::move(mean_p), std::move(variance), std::move(confidence), alpha,
                             epsilon};
}

}  // namespace trav
