#pragma once

#include <cmath>
#include <vector>

#include "trav/dense_map.hpp"
#include "trav/features.hpp"
#include "trav/math_util.hpp"

// Test-only logistic probe over FeatureMap channels: full-batch Adam on BCE.
// Used as an independent learnability oracle for generated scenes.
namespace trav::testing {

struct ProbeResult {
    std::vector<double> weights;  // kFeatureDim + 1 (bias)
    UnitIntervalMap prediction;
};

inline ProbeResult train_logistic_probe(const FeatureMap& features, const UnitIntervalMap& labels,
                                        int iterations = 400, double lr = 0.1) {
    const std::size_t n = features.pixel_count();
    std::vector<double> w(kFeatureDim + 1, 0.0);
    std::vector<double> m(w.size(), 0.0);
    std::vector<double> vv(w.size(), 0.0);
    const auto yv = labels.map().values();
    for (int it = 0; it < iterations; ++it) {
        std::vector<double> grad(w.size(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* px = features.data.data() + i * kFeatureDim;
            double z = w[kFeatureDim];
            for (int c = 0; c < kFeatureDim; ++c) {
                z += w[c] * px[c];
            }
            const double err = (sigmoid(z) - yv[i]) / static_cast<double>(n);
            for (int c = 0; c < kFeatureDim; ++c) {
                grad[c] += err * px[c];
            }
            grad[kFeatureDim] += err;
        }
        const double t = it + 1;
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = 0.9 * m[j] + 0.1 * grad[j];
            vv[j] = 0.999 * vv[j] + 0.001 * grad[j] * grad[j];
            const double mh = m[j] / (1.0 - std::pow(0.9, t));
            const double vh = vv[j] / (1.0 - std::pow(0.999, t));
            w[j] -= lr * mh / (std::sqrt(vh) + 1e-8);
        }
    }
    std::vector<double> pred(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* px = features.data.data() + i * kFeatureDim;
        double z = w[kFeatureDim];
        for (int c = 0; c < kFeatureDim; ++c) {
            z += w[c] * px[c];
        }
        pred[i] = sigmoid(z);
    }
    return ProbeResult{std::move(w),
                       UnitIntervalMap(DenseMap::from_values(features.height, features.width,
                                                             std::move(pred)))};
}

}  // namespace trav::testing
