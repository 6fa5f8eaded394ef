#include "trav/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "trav/math_util.hpp"
#include "trav/parallel.hpp"

namespace trav {

namespace {

void require_positive_depth(const DenseMap& depth, const char* what) {
    for (double d : depth.values()) {
        if (!(d > 0.0)) {
            throw std::invalid_argument(std::string(what) + ": depth values must be positive");
        }
    }
}

}  // namespace

NormalMap surface_normals(const DenseMap& depth) {
    if (depth.height() < 3 || depth.width() < 3) {
        throw std::invalid_argument("surface_normals: map must be at least 3x3");
    }
    require_positive_depth(depth, "surface_normals");

    const int height = depth.height();
    const int width = depth.width();
    std::vector<double> nx(depth.size());
    std::vector<double> ny(depth.size());
    std::vector<double> nz(depth.size());
    parallel_rows(height, [&](int v) {
        // borders replicate the nearest interior pixel's normal
        const int vi = std::clamp(v, 1, height - 2);
        for (int u = 0; u < width; ++u) {
            const int ui = std::clamp(u, 1, width - 2);
            const double du = (depth.at(vi, ui + 1) - depth.at(vi, ui - 1)) * 0.5;
            const double dv = (depth.at(vi + 1, ui) - depth.at(vi - 1, ui)) * 0.5;
            const double inv_len = 1.0 / std::sqrt(du * du + dv * dv + 1.0);
            const std::size_t i = static_cast<std::size_t>(v) * width + u;
            nx[i] = -du * inv_len;
            ny[i] = -dv * inv_len;
            nz[i] = inv_len;
        }
    });
    return NormalMap{DenseMap::from_values(height, width, std::move(nx)),
                     DenseMap::from_values(height, width, std::move(ny)),
                     DenseMap::from_values(height, width, std::move(nz))};
}

GroundPlane fit_ground_plane(const DenseMap& depth, const UnitIntervalMap& traversable_mask) {
    require_same_shape(depth, traversable_mask.map(), "fit_ground_plane");
    require_binary(traversable_mask, "fit_ground_plane");

    const int height = depth.height();
    const int width = depth.width();

    // centroid of masked pseudo-3D points, fixed row-order accumulation
    double cx = 0.0, cy = 0.0, cz = 0.0;
    std::size_t count = 0;
    for (int v = 0; v < height; ++v) {
        for (int u = 0; u < width; ++u) {
            if (traversable_mask.at(v, u) == 1.0) {
                cx += u;
                cy += v;
                cz += depth.at(v, u);
                ++count;
            }
        }
    }
    if (count < 3) {
        throw PlaneFitError(PlaneFitError::Reason::too_few_points,
                            "fit_ground_plane: fewer than 3 masked points");
    }
    cx /= static_cast<double>(count);
    cy /= static_cast<double>(count);
    cz /= static_cast<double>(count);

    // scatter matrix of centered points; its smallest eigenvector equals the
    // smallest right-singular vector of the centered point matrix
    Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
    for (int v = 0; v < height; ++v) {
        for (int u = 0; u < width; ++u) {
            if (traversable_mask.at(v, u) == 1.0) {
                const Eigen::Vector3d d(u - cx, v - cy, depth.at(v, u) - cz);
                scatter += d * d.transpose();
            }
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
    if (eig.info() != Eigen::Success) {
        throw NumericError("fit_ground_plane: eigensolver failed");
    }
    const Eigen::Vector3d evals = eig.eigenvalues();  // ascending
    if (evals(1) <= std::max(evals(2), 1.0) * 1e-12) {
        throw PlaneFitError(PlaneFitError::Reason::rank_deficient,
                            "fit_ground_plane: masked points are collinear");
    }
    Eigen::Vector3d n = eig.eigenvectors().col(0);

    // orientation: mean non-masked point should sit at nonnegative height
    double sx = 0.0, sy = 0.0, sz = 0.0;
    std::size_t other = 0;
    for (int v = 0; v < height; ++v) {
        for (int u = 0; u < width; ++u) {
            if (traversable_mask.at(v, u) == 0.0) {
                sx += u;
                sy += v;
                sz += depth.at(v, u);
                ++other;
            }
        }
    }
    double side = 0.0;
    if (other > 0) {
        const double inv = 1.0 / static_cast<double>(other);
        side = (sx * inv - cx) * n(0) + (sy * inv - cy) * n(1) + (sz * inv - cz) * n(2);
    }
    constexpr double kTieTol = 1e-12;
    if (side < -kTieTol) {
        n = -n;
    } else if (std::abs(side) <= kTieTol && n(2) < 0.0) {
        n = -n;
    }

    const double offset = cx * n(0) + cy * n(1) + cz * n(2);
    return GroundPlane{{n(0), n(1), n(2)}, offset};
}

double median_of(const DenseMap& map) {
    std::vector<double> vals(map.values().begin(), map.values().end());
    const std::size_t n = vals.size();
    const std::size_t mid = n / 2;
    std::nth_element(vals.begin(), vals.begin() + mid, vals.end());
    double m = vals[mid];
    if (n % 2 == 0) {
        std::nth_element(vals.begin(), vals.begin() + (mid - 1), vals.begin() + mid);
        m = 0.5 * (m + vals[mid - 1]);
    }
    return m;
}

UnitIntervalMap slope_risk(const NormalMap& normals, const GroundPlane& plane,
                           const DenseMap& depth) {
    require_same_shape(normals.nx, depth, "slope_risk");
    require_positive_depth(depth, "slope_risk");

    const double median = median_of(depth);
    const int height = depth.height();
    const int width = depth.width();
    std::vector<double> risk(depth.size());
    parallel_rows(height, [&](int v) {
        for (int u = 0; u < width; ++u) {
            const std::size_t i = static_cast<std::size_t>(v) * width + u;
            const double dot = normals.nx.at(v, u) * plane.normal[0] +
                               normals.ny.at(v, u) * plane.normal[1] +
                               normals.nz.at(v, u) * plane.normal[2];
            // unclamped depth ratio; only the final product is clamped
            risk[i] = clamp01((1.0 - std::abs(dot)) * (depth.at(v, u) / median));
        }
    });
    return UnitIntervalMap(DenseMap::from_values(height, width, std::move(risk)));
}

UnitIntervalMap elevation_risk(const DenseMap& depth, const GroundPlane& plane, double beta) {
    if (!(beta > 0.0)) {
        throw std::invalid_argument("elevation_risk: beta must be > 0");
    }
    const int height = depth.height();
    const int width = depth.width();
    std::vector<double> risk(depth.size());
    parallel_rows(height, [&](int v) {
        for (int u = 0; u < width; ++u) {
            const std::size_t i = static_cast<std::size_t>(v) * width + u;
            const double h = std::max(0.0, plane.signed_height(u, v, depth.at(v, u)));
            risk[i] = -std::expm1(-beta * h);
        }
    });
    return UnitIntervalMap(DenseMap::from_values(height, width, std::move(risk)));
}

PseudoRiskLabels pseudo_risk_labels(const DenseMap& depth, const UnitIntervalMap& traversable_mask,
                                    double beta) {
    const GroundPlane plane = fit_ground_plane(depth, traversable_mask);
    const NormalMap normals = surface_normals(depth);
    UnitIntervalMap slope = slope_risk(normals, plane, depth);
    UnitIntervalMap elevation = elevation_risk(depth, plane, beta);
    return PseudoRiskLabels{std::move(slope), std::move(elevation), beta};
}

}  // namespace trav
