#pragma once

#include <vector>

#include "trav/dense_map.hpp"
#include "trav/image_io.hpp"

namespace trav {

inline constexpr int kFeatureDim = 16;

// Channel layout (each scaled to [-1, 1]):
//   0-2   RGB
//   3-4   normalized (u, v) pixel coordinates
//   5-7   local RGB mean over a 5x5 window
//   8-10  local RGB standard deviation over a 5x5 window
//   11    intensity gradient magnitude (central differences)
//   12-13 gradient orientation sine / cosine
//   14    constant bias (1)
//   15    reserved (0)
struct FeatureMap {
    int height = 0;
    int width = 0;
    std::vector<double> data;  // pixel-major: data[(v*width + u)*kFeatureDim + c]

    double at(int v, int u, int c) const {
        return data[(static_cast<std::size_t>(v) * width + u) * kFeatureDim + c];
    }
    const double* pixel(int v, int u) const {
        return data.data() + (static_cast<std::size_t>(v) * width + u) * kFeatureDim;
    }
    std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
};

// Deterministic function of the image alone; requires at least 8x8 input.
FeatureMap extract_features(const RgbImage& image);

}  // namespace trav
