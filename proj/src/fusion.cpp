#include "trav/fusion.hpp"

#include <cmath>
#include <stdexcept>

#include "trav/parallel.hpp"

namespace trav {

UnitIntervalMap fuse(const UnitIntervalMap& confidence, const UnitIntervalMap& mean_p,
                     const UnitIntervalMap& slope_risk, const UnitIntervalMap& elevation_risk) {
    require_same_shape(confidence.map(), mean_p.map(), "fuse");
    require_same_shape(confidence.map(), slope_risk.map(), "fuse");
    require_same_shape(confidence.map(), elevation_risk.map(), "fuse");

    const int height = confidence.height();
    const int width = confidence.width();
    std::vector<double> score(confidence.map().size());
    parallel_rows(height, [&](int v) {
        for (int u = 0; u < width; ++u) {
            // grouped so the risks enter only through their (commutative) sum
            score[static_cast<std::size_t>(v) * width + u] =
                confidence.at(v, u) *
                (1.0 - (slope_risk.at(v, u) + elevation_risk.at(v, u)) / 2.0) * mean_p.at(v, u);
        }
    });
    return UnitIntervalMap(DenseMap::from_values(height, width, std::move(score)));
}

double total_loss(double sem, double geo, double distill, double lambda_geo) {
    if (!std::isfinite(sem) || !std::isfinite(geo) || !std::isfinite(distill)) {
        throw std::invalid_argument("total_loss: components must be finite");
    }
    if (sem < 0.0 || geo < 0.0 || distill < 0.0 || lambda_geo < 0.0) {
        throw std::invalid_argument("total_loss: components and lambda_geo must be >= 0");
    }
    return sem + lambda_geo * (geo + distill);
}

}  // namespace trav
