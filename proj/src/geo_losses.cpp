#include "trav/geo_losses.hpp"

#include <cmath>
#include <stdexcept>

#include "trav/parallel.hpp"

namespace trav {

namespace {

inline double huber(double e) {
    const double a = std::abs(e);
    return a <= 1.0 ? 0.5 * e * e : a - 0.5;
}

inline double huber_grad(double e) {
    if (e > 1.0) return 1.0;
    if (e < -1.0) return -1.0;
    return e;
}

inline double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

void GeoLossWeights::validate() const {
    if (!(lambda_slope >= 0.0) || !(lambda_elev >= 0.0) || !(lambda_geo >= 0.0)) {
        throw std::invalid_argument("GeoLossWeights: weights must be >= 0");
    }
}

SmoothL1Result smooth_l1_geo(const DenseMap& pred_slope, const DenseMap& pred_elev,
                             const DenseMap& pseudo_slope, const DenseMap& pseudo_elev,
                             const GeoLossWeights& weights) {
    require_same_shape(pred_slope, pseudo_slope, "smooth_l1_geo");
    require_same_shape(pred_elev, pseudo_elev, "smooth_l1_geo");
    require_same_shape(pred_slope, pred_elev, "smooth_l1_geo");
    weights.validate();

    const int height = pred_slope.height();
    const int width = pred_slope.width();
    const double inv_n = 1.0 / static_cast<double>(pred_slope.size());

    std::vector<double> grad_slope(pred_slope.size());
    std::vector<double> grad_elev(pred_slope.size());
    const double slope_term = sum_rows(height, [&](int v) {
        double row = 0.0;
        for (int u = 0; u < width; ++u) {
            const double e = pred_slope.at(v, u) - pseudo_slope.at(v, u);
            row += huber(e);
            grad_slope[static_cast<std::size_t>(v) * width + u] =
                weights.lambda_slope * huber_grad(e) * inv_n;
        }
        return row;
    }) * inv_n;
    const double elev_term = sum_rows(height, [&](int v) {
        double row = 0.0;
        for (int u = 0; u < width; ++u) {
            const double e = pred_elev.at(v, u) - pseudo_elev.at(v, u);
            row += huber(e);
            grad_elev[static_cast<std::size_t>(v) * width + u] =
                weights.lambda_elev * huber_grad(e) * inv_n;
        }
        return row;
    }) * inv_n;

    return SmoothL1Result{weights.lambda_slope * slope_term + weights.lambda_elev * elev_term,
                          slope_term, elev_term,
                          DenseMap::from_values(height, width, std::move(grad_slope)),
                          DenseMap::from_values(height, width, std::move(grad_elev))};
}

AffineAlignment align_least_squares(const DenseMap& predicted, const DenseMap& teacher) {
    require_same_shape(predicted, teacher, "align_least_squares");
    const int height = predicted.height();
    const int width = predicted.width();
    const double n = static_cast<double>(predicted.size());

    const double sum_d = sum_rows(height, [&](int v) {
        double row = 0.0;
        for (int u = 0; u < width; ++u) row += predicted.at(v, u);
        return row;
    });
    const double sum_t = sum_rows(height, [&](int v) {
        double row = 0.0;
        for (int u = 0; u < width; ++u) row += teacher.at(v, u);
        return row;
    });
    const double mean_d = sum_d / n;
    const double mean_t = sum_t / n;

    const double sdd = sum_rows(height, [&](int v) {
        double row = 0.0;
        for (int u = 0; u < width; ++u) {
            const double d = predicted.at(v, u) - mean_d;
            row += d * d;
        }
        return row;
    });
    if (sdd == 0.0) {
        return AffineAlignment{1.0, mean_t - mean_d, true};
    }
    const double sdt = sum_rows(height, [&](int v) {
        double row = 0.0;
        for (int u = 0; u < width; ++u) {
            row += (predicted.at(v, u) - mean_d) * (teacher.at(v, u) - mean_t);
        }
        return row;
    });
    const double scale = sdt / sdd;
    return AffineAlignment{scale, mean_t - scale * mean_d, false};
}

SsiResult ssi_loss(const DenseMap& predicted, const DenseMap& teacher) {
    const AffineAlignment align = align_least_squares(predicted, teacher);
    const int height = predicted.height();
    const int width = predicted.width();
    const double n = static_cast<double>(predicted.size());
    const double s = align.scale;
    const double t = align.shift;

    std::vector<double> sgn(predicted.size());
    const double loss = sum_rows(height, [&](int v) {
        double row = 0.0;
        for (int u = 0; u < width; ++u) {
            const std::size_t i = static_cast<std::size_t>(v) * width + u;
            const double r = s * predicted.at(v, u) + t - teacher.at(v, u);
            sgn[i] = sign_of(r);
            row += std::abs(r);
        }
        return row;
    }) / n;

    std::vector<double> grad(predicted.size());
    if (align.degenerate) {
        // fallback shift = mean(teacher) - mean(predicted); s is constant
        double sgn_sum = 0.0;
        for (double g : sgn) sgn_sum += g;
        const double mean_sgn = sgn_sum / n;
        parallel_rows(height, [&](int v) {
            for (int u = 0; u < width; ++u) {
                const std::size_t i = static_cast<std::size_t>(v) * width + u;
                grad[i] = (sgn[i] - mean_sgn) / n;
            }
        });
    } else {
        // Differentiate through the normal equations A [s t]^T = b with
        // A = [[sum d^2, sum d], [sum d, n]]:
        //   d[s t]/d d_j = A^{-1} [teacher_j - 2 d_j s - t, -s]^T,
        // so with w = A^{-1} [sum sgn*d, sum sgn]^T the pixel gradient is
        //   (sgn_j s + w0 (teacher_j - 2 d_j s - t) - w1 s) / n.
        const double sum_d = sum_rows(height, [&](int v) {
            double row = 0.0;
            for (int u = 0; u < width; ++u) row += predicted.at(v, u);
            return row;
        });
        const double sum_dd = sum_rows(height, [&](int v) {
            double row = 0.0;
            for (int u = 0; u < width; ++u) row += predicted.at(v, u) * predicted.at(v, u);
            return row;
        });
        const double sum_sgn_d = sum_rows(height, [&](int v) {
            double row = 0.0;
            for (int u = 0; u < width; ++u) {
                row += sgn[static_cast<std::size_t>(v) * width + u] * predicted.at(v, u);
            }
            return row;
        });
        double sum_sgn = 0.0;
        for (double g : sgn) sum_sgn += g;

        const double det = sum_dd * n - sum_d * sum_d;
        const double w0 = (n * sum_sgn_d - sum_d * sum_sgn) / det;
        const double w1 = (-sum_d * sum_sgn_d + sum_dd * sum_sgn) / det;
        parallel_rows(height, [&](int v) {
            for (int u = 0; u < width; ++u) {
                const std::size_t i = static_cast<std::size_t>(v) * width + u;
                const double d = predicted.at(v, u);
                const double te = teacher.at(v, u);
                grad[i] = (sgn[i] * s + w0 * (te - 2.0 * d * s - t) - w1 * s) / n;
            }
        });
    }
    return SsiResult{loss, DenseMap::from_values(height, width, std::move(grad)), align};
}

}  // namespace trav
