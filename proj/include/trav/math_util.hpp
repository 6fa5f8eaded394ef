#pragma once

#include <algorithm>
#include <cmath>

namespace trav {

inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// log(sigmoid(x)), stable for large |x|
inline double log_sigmoid(double x) {
    if (x >= 0.0) {
        return -std::log1p(std::exp(-x));
    }
    return x - std::log1p(std::exp(x));
}

inline double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

inline double smoothstep01(double x) {
    x = clamp01(x);
    return x * x * (3.0 - 2.0 * x);
}

inline double lerp(double a, double b, double t) { return a + (b - a) * t; }

}  // namespace trav
