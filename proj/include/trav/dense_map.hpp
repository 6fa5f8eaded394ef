#pragma once

#include <cassert>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace trav {

// H x W grid of finite scalars, row-major, origin at top-left. Values are
// held as doubles in memory; the on-disk .dmap format stores 32-bit floats.
class DenseMap {
public:
    DenseMap(int height, int width, double fill);
    static DenseMap from_values(int height, int width, std::vector<double> values);

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return values_.size(); }

    double at(int v, int u) const {
        assert(v >= 0 && v < height_ && u >= 0 && u < width_);
        return values_[static_cast<std::size_t>(v) * width_ + u];
    }
    double& at(int v, int u) {
        assert(v >= 0 && v < height_ && u >= 0 && u < width_);
        return values_[static_cast<std::size_t>(v) * width_ + u];
    }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    bool same_shape(const DenseMap& other) const {
        return height_ == other.height_ && width_ == other.width_;
    }

private:
    DenseMap() = default;

    int height_ = 0;
    int width_ = 0;
    std::vector<double> values_;
};

enum class ElemOp { add, sub, mul, min, max };

DenseMap elementwise(const DenseMap& a, const DenseMap& b, ElemOp op);

// .dmap: ASCII header "DMAP <height> <width>\n" followed by height*width
// IEEE-754 binary32 little-endian values, row-major.
void save_dmap(const DenseMap& map, const std::filesystem::path& path);
DenseMap load_dmap(const std::filesystem::path& path);

// DenseMap with every value in [0, 1]. Construction is strict: out-of-range
// values throw; clamping is only ever explicit via clamp_to_unit.
class UnitIntervalMap {
public:
    explicit UnitIntervalMap(DenseMap map);

    int height() const { return map_.height(); }
    int width() const { return map_.width(); }
    double at(int v, int u) const { return map_.at(v, u); }
    const DenseMap& map() const { return map_; }

private:
    DenseMap map_;
};

// Clamps numerical dust (e.g. post-sigmoid 1+1e-16) into [0, 1].
UnitIntervalMap clamp_to_unit(const DenseMap& map);

// True iff every value is exactly 0.0 or 1.0.
bool is_binary(const UnitIntervalMap& map);

// Throws std::invalid_argument unless the map is binary.
void require_binary(const UnitIntervalMap& labels, const char* what);

void require_same_shape(const DenseMap& a, const DenseMap& b, const char* what);

}  // namespace trav
