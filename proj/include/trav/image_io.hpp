#pragma once

#include <array>
#include <filesystem>

#include "trav/dense_map.hpp"

namespace trav {

struct RgbImage {
    DenseMap r;
    DenseMap g;
    DenseMap b;
};

// Binary PPM (P6, maxval 255). Channel values in [0, 1]; bytes are
// round(255 * value). Reading maps byte k back to k/255.
void write_ppm(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_ppm(const std::filesystem::path& path);

// Binary PGM (P5, maxval 255) used for score visualizations; pixel = round(255 * value).
void write_pgm(const std::filesystem::path& path, const UnitIntervalMap& map);

}  // namespace trav
