#include "trav/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "trav/parallel.hpp"

namespace trav {

namespace {

constexpr int kWindowRadius = 2;  // 5x5 window
constexpr double kMagScale = 2.0 * M_SQRT2;  // gradient magnitude is at most 1/sqrt(2)

inline double scale_to_unit_range(double x01) { return 2.0 * x01 - 1.0; }

}  // namespace

FeatureMap extract_features(const RgbImage& image) {
    require_same_shape(image.r, image.g, "extract_features");
    require_same_shape(image.r, image.b, "extract_features");
    const int height = image.r.height();
    const int width = image.r.width();
    if (height < 8 || width < 8) {
        throw std::invalid_argument("extract_features: image must be at least 8x8");
    }

    const DenseMap* channels[3] = {&image.r, &image.g, &image.b};

    FeatureMap f;
    f.height = height;
    f.width = width;
    f.data.assign(static_cast<std::size_t>(height) * width * kFeatureDim, 0.0);

    parallel_rows(height, [&](int v) {
        for (int u = 0; u < width; ++u) {
            double* px = f.data.data() + (static_cast<std::size_t>(v) * width + u) * kFeatureDim;

            px[0] = scale_to_unit_range(image.r.at(v, u));
            px[1] = scale_to_unit_range(image.g.at(v, u));
            px[2] = scale_to_unit_range(image.b.at(v, u));
            px[3] = scale_to_unit_range(static_cast<double>(u) / (width - 1));
            px[4] = scale_to_unit_range(static_cast<double>(v) / (height - 1));

            // 5x5 window statistics, window clamped to the image
            const int v0 = std::max(0, v - kWindowRadius);
            const int v1 = std::min(height - 1, v + kWindowRadius);
            const int u0 = std::max(0, u - kWindowRadius);
            const int u1 = std::min(width - 1, u + kWindowRadius);
            const double inv_count = 1.0 / ((v1 - v0 + 1) * (u1 - u0 + 1));
            for (int c = 0; c < 3; ++c) {
                double sum = 0.0;
                double sum_sq = 0.0;
                for (int vv = v0; vv <= v1; ++vv) {
                    for (int uu = u0; uu <= u1; ++uu) {
                        const double x = channels[c]->at(vv, uu);
                        sum += x;
                        sum_sq += x * x;
                    }
                }
                const double mean = sum * inv_count;
                const double var = std::max(0.0, sum_sq * inv_count - mean * mean);
                px[5 + c] = scale_to_unit_range(mean);
                // std of values in [0,1] is at most 1/2
                px[8 + c] = 4.0 * std::sqrt(var) - 1.0;
            }

            // intensity gradient via central differences, borders replicated
            const auto intensity = [&](int vv, int uu) {
                vv = std::clamp(vv, 0, height - 1);
                uu = std::clamp(uu, 0, width - 1);
                return (image.r.at(vv, uu) + image.g.at(vv, uu) + image.b.at(vv, uu)) / 3.0;
            };
            const double gu = (intensity(v, u + 1) - intensity(v, u - 1)) * 0.5;
            const double gv = (intensity(v + 1, u) - intensity(v - 1, u)) * 0.5;
            const double mag = std::sqrt(gu * gu + gv * gv);
            px[11] = kMagScale * mag - 1.0;
            if (mag > 1e-12) {
                px[12] = gv / mag;
                px[13] = gu / mag;
            }
            px[14] = 1.0;
            px[15] = 0.0;

            for (int c = 0; c < kFeatureDim; ++c) {
                px[c] = std::clamp(px[c], -1.0, 1.0);
            }
        }
    });
    return f;
}

}  // namespace trav
