#pragma once

#include <array>

#include "trav/dense_map.hpp"
#include "trav/error.hpp"

namespace trav {

// Per-pixel unit surface normals in pseudo-3D (u, v, depth) space.
struct NormalMap {
    DenseMap nx;
    DenseMap ny;
    DenseMap nz;

    int height() const { return nx.height(); }
    int width() const { return nx.width(); }
};

struct GroundPlane {
    std::array<double, 3> normal;  // unit length
    double offset = 0.0;           // plane is {x : x . normal == offset}

    // signed height of pseudo-3D point (u, v, depth) above the plane
    double signed_height(double u, double v, double depth) const {
        return u * normal[0] + v * normal[1] + depth * normal[2] - offset;
    }
};

struct PlaneFitError : Error {
    enum class Reason { too_few_points, rank_deficient };
    PlaneFitError(Reason r, const std::string& msg) : Error(msg), reason(r) {}
    Reason reason;
};

struct PseudoRiskLabels {
    UnitIntervalMap slope;
    UnitIntervalMap elevation;
    double beta;
};

// Normals via central differences of the pseudo-3D embedding x = (u, v, D):
// interior normal = normalize((-dD/du, -dD/dv, 1)); border pixels replicate
// the nearest interior normal. Requires positive depth and a map >= 3x3.
NormalMap surface_normals(const DenseMap& depth);

// Least-squares plane over masked pseudo-3D points via the eigendecomposition
// of the centered scatter matrix (equivalent to the SVD of the centered point
// matrix). The normal is sign-fixed so the mean non-masked point has
// nonnegative height; ties break toward positive z.
GroundPlane fit_ground_plane(const DenseMap& depth, const UnitIntervalMap& traversable_mask);

// (1 - |n . n_gnd|) * D / median(D), clamped to [0, 1].
UnitIntervalMap slope_risk(const NormalMap& normals, const GroundPlane& plane,
                           const DenseMap& depth);

// 1 - exp(-beta * max(0, height above plane)).
UnitIntervalMap elevation_risk(const DenseMap& depth, const GroundPlane& plane, double beta);

// Full pseudo-label pipeline: plane fit on the traversable mask, normals from
// depth, then both risk maps.
PseudoRiskLabels pseudo_risk_labels(const DenseMap& depth, const UnitIntervalMap& traversable_mask,
                                    double beta);

// Exact median (mean of the two central order statistics for even counts).
double median_of(const DenseMap& map);

}  // namespace trav
