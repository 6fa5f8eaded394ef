#include "trav/dense_map.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "trav/error.hpp"
#include "trav/parallel.hpp"

namespace trav {

namespace {

constexpr int kMaxDim = 1 << 16;
constexpr std::size_t kMaxPixels = std::size_t{1} << 26;

void check_dims(int height, int width) {
    if (height < 1 || width < 1) {
        throw std::invalid_argument("DenseMap dimensions must be positive");
    }
    if (height > kMaxDim || width > kMaxDim ||
        static_cast<std::size_t>(height) * static_cast<std::size_t>(width) > kMaxPixels) {
        throw std::invalid_argument("DenseMap dimensions exceed the supported maximum");
    }
}

void check_finite(std::span<const double> values, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(what) + ": non-finite value");
        }
    }
}

void put_f32_le(std::string& out, float f) {
    const auto bits = std::bit_cast<std::uint32_t>(f);
    out.push_back(static_cast<char>(bits & 0xff));
    out.push_back(static_cast<char>((bits >> 8) & 0xff));
    out.push_back(static_cast<char>((bits >> 16) & 0xff));
    out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

float get_f32_le(const unsigned char* p) {
    const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                               (static_cast<std::uint32_t>(p[1]) << 8) |
                               (static_cast<std::uint32_t>(p[2]) << 16) |
                               (static_cast<std::uint32_t>(p[3]) << 24);
    return std::bit_cast<float>(bits);
}

}  // namespace

DenseMap::DenseMap(int height, int width, double fill) {
    check_dims(height, width);
    if (!std::isfinite(fill)) {
        throw std::invalid_argument("DenseMap fill value must be finite");
    }
    height_ = height;
    width_ = width;
    values_.assign(static_cast<std::size_t>(height) * width, fill);
}

DenseMap DenseMap::from_values(int height, int width, std::vector<double> values) {
    check_dims(height, width);
    if (values.size() != static_cast<std::size_t>(height) * width) {
        throw std::invalid_argument("DenseMap value count does not match dimensions");
    }
    check_finite(values, "DenseMap");
    DenseMap m;
    m.height_ = height;
    m.width_ = width;
    m.values_ = std::move(values);
    return m;
}

void require_same_shape(const DenseMap& a, const DenseMap& b, const char* what) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch");
    }
}

DenseMap elementwise(const DenseMap& a, const DenseMap& b, ElemOp op) {
    require_same_shape(a, b, "elementwise");
    std::vector<double> out(a.size());
    const auto av = a.values();
    const auto bv = b.values();
    parallel_rows(a.height(), [&](int v) {
        const std::size_t base = static_cast<std::size_t>(v) * a.width();
        for (int u = 0; u < a.width(); ++u) {
            const std::size_t i = base + u;
            switch (op) {
                case ElemOp::add: out[i] = av[i] + bv[i]; break;
                case ElemOp::sub: out[i] = av[i] - bv[i]; break;
                case ElemOp::mul: out[i] = av[i] * bv[i]; break;
                case ElemOp::min: out[i] = std::min(av[i], bv[i]); break;
                case ElemOp::max: out[i] = std::max(av[i], bv[i]); break;
            }
        }
    });
    for (double v : out) {
        if (!std::isfinite(v)) {
            throw NumericError("elementwise: result overflowed to non-finite");
        }
    }
    return DenseMap::from_values(a.height(), a.width(), std::move(out));
}

void save_dmap(const DenseMap& map, const std::filesystem::path& path) {
    std::string buf;
    buf.reserve(32 + map.size() * 4);
    buf += "DMAP " + std::to_string(map.height()) + " " + std::to_string(map.width()) + "\n";
    for (double v : map.values()) {
        const float f = static_cast<float>(v);
        if (!std::isfinite(f)) {
            throw NumericError("save_dmap: value does not fit 32-bit float range");
        }
        put_f32_le(buf, f);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("save_dmap: cannot open " + path.string() + " for writing");
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) {
        throw IoError("save_dmap: write failed for " + path.string());
    }
}

DenseMap load_dmap(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("load_dmap: cannot open " + path.string());
    }
    std::string header;
    if (!std::getline(in, header)) {
        throw FormatError("load_dmap: missing header line");
    }
    std::istringstream hs(header);
    std::string magic;
    long long height = 0;
    long long width = 0;
    if (!(hs >> magic >> height >> width) || magic != "DMAP") {
        throw FormatError("load_dmap: malformed header: \"" + header + "\"");
    }
    std::string trailing;
    if (hs >> trailing) {
        throw FormatError("load_dmap: malformed header: trailing tokens");
    }
    if (height < 1 || width < 1 || height > kMaxDim || width > kMaxDim ||
        static_cast<std::size_t>(height) * static_cast<std::size_t>(width) > kMaxPixels) {
        throw FormatError("load_dmap: dimension overflow in header");
    }
    const std::size_t count = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    std::vector<unsigned char> payload(count * 4);
    in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (static_cast<std::size_t>(in.gcount()) != payload.size()) {
        throw FormatError("load_dmap: truncated payload");
    }
    char extra = 0;
    if (in.get(extra)) {
        throw FormatError("load_dmap: trailing data after payload");
    }
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) {
        const float f = get_f32_le(payload.data() + i * 4);
        if (!std::isfinite(f)) {
            throw FormatError("load_dmap: non-finite payload value");
        }
        values[i] = static_cast<double>(f);
    }
    return DenseMap::from_values(static_cast<int>(height), static_cast<int>(width),
                                 std::move(values));
}

UnitIntervalMap::UnitIntervalMap(DenseMap map) : map_(std::move(map)) {
    for (double v : map_.values()) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument("UnitIntervalMap: value outside [0, 1]");
        }
    }
}

UnitIntervalMap clamp_to_unit(const DenseMap& map) {
    std::vector<double> out(map.values().begin(), map.values().end());
    for (double& v : out) {
        v = std::clamp(v, 0.0, 1.0);
    }
    return UnitIntervalMap(DenseMap::from_values(map.height(), map.width(), std::move(out)));
}

bool is_binary(const UnitIntervalMap& map) {
    for (double v : map.map().values()) {
        if (v != 0.0 && v != 1.0) {
            return false;
        }
    }
    return true;
}

void require_binary(const UnitIntervalMap& labels, const char* what) {
    if (!is_binary(labels)) {
        throw std::invalid_argument(std::string(what) + ": labels must be binary (0 or 1)");
    }
}

}  // namespace trav
