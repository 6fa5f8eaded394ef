#include "trav/reference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "trav/math_util.hpp"

namespace trav::reference {

namespace {

constexpr int kWindowRadius = 2;
constexpr double kMagScale = 2.0 * M_SQRT2;

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
    for (int v = 0; v < height; ++v) {
        for (int u = 0; u < width; ++u) {
            double* px = f.data.data() + (static_cast<std::size_t>(v) * width + u) * kFeatureDim;
            px[0] = scale_to_unit_range(image.r.at(v, u));
            px[1] = scale_to_unit_range(image.g.at(v, u));
            px[2] = scale_to_unit_range(image.b.at(v, u));
            px[3] = scale_to_unit_range(static_cast<double>(u) / (width - 1));
            px[4] = scale_to_unit_range(static_cast<double>(v) / (height - 1));

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
                px[8 + c] = 4.0 * std::sqrt(var) - 1.0;
            }

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
    }
    return f;
}

DecodeResult decode(const TokenBank& bank, const FeatureMap& features) {
    const ModelDims& dims = bank.dims();
    const auto p = bank.parameters();

    std::vector<double> prompt_mean(dims.d_tok, 0.0);
    for (int i = 0; i < dims.n_prompt; ++i) {
        const auto tok = bank.prompt_token(i);
        for (int j = 0; j < dims.d_tok; ++j) {
            prompt_mean[j] += tok[j];
        }
    }
    for (int j = 0; j < dims.d_tok; ++j) {
        prompt_mean[j] /= static_cast<double>(dims.n_prompt);
    }

    std::array<DenseMap, 5> maps{DenseMap(1, 1, 0.0), DenseMap(1, 1, 0.0), DenseMap(1, 1, 0.0),
                                 DenseMap(1, 1, 0.0), DenseMap(1, 1, 0.0)};
    for (int head = 0; head < kNumHeads; ++head) {
        const auto tok = bank.token(head);
        std::vector<double> q(dims.d_tok);
        for (int j = 0; j < dims.d_tok; ++j) {
            q[j] = tok[j] + prompt_mean[j];
        }
        const double* w1 = p.data() + bank.mlp_offset(head);
        const double* b1 = w1 + static_cast<std::size_t>(dims.hidden) * dims.d_tok;
        const double* w2 = b1 + dims.hidden;
        const double* b2 = w2 + static_cast<std::size_t>(dims.f_dim) * dims.hidden;
        std::vector<double> hidden(dims.hidden);
        for (int i = 0; i < dims.hidden; ++i) {
            double acc = b1[i];
            const double* row = w1 + static_cast<std::size_t>(i) * dims.d_tok;
            for (int j = 0; j < dims.d_tok; ++j) {
                acc += row[j] * q[j];
            }
            hidden[i] = std::tanh(acc);
        }
        std::vector<double> head_w(dims.f_dim);
        for (int c = 0; c < dims.f_dim; ++c) {
            double acc = b2[c];
            const double* row = w2 + static_cast<std::size_t>(c) * dims.hidden;
            for (int i = 0; i < dims.hidden; ++i) {
                acc += row[i] * hidden[i];
            }
            head_w[c] = acc;
        }
        std::vector<double> out(features.pixel_count());
        for (int v = 0; v < features.height; ++v) {
            for (int u = 0; u < features.width; ++u) {
                const double* px = features.pixel(v, u);
                double acc = 0.0;
                for (int c = 0; c < kFeatureDim; ++c) {
                    acc += head_w[c] * px[c];
                }
                out[static_cast<std::size_t>(v) * features.width + u] = acc;
            }
        }
        maps[head] = DenseMap::from_values(features.height, features.width, std::move(out));
    }

    const double* dw = p.data() + bank.depth_offset();
    const double db = dw[dims.f_dim];
    std::vector<double> depth(features.pixel_count());
    for (int v = 0; v < features.height; ++v) {
        for (int u = 0; u < features.width; ++u) {
            const double* px = features.pixel(v, u);
            double acc = db;
            for (int c = 0; c < kFeatureDim; ++c) {
                acc += dw[c] * px[c];
            }
            depth[static_cast<std::size_t>(v) * features.width + u] = acc;
        }
    }

    const auto sigmoided = [](const DenseMap& logits) {
        std::vector<double> out(logits.size());
        const auto lv = logits.values();
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = sigmoid(lv[i]);
        }
        return UnitIntervalMap(
            DenseMap::from_values(logits.height(), logits.width(), std::move(out)));
    };

    return DecodeResult{
        {std::move(maps[0]), std::move(maps[1]), std::move(maps[2])},
        {maps[3], maps[4]},
        {sigmoided(maps[3]), sigmoided(maps[4])},
        DenseMap::from_values(features.height, features.width, std::move(depth))};
}

LossResult focal_loss(const DenseMap& logits, const UnitIntervalMap& labels, double gamma,
                      LossReduction reduction) {
    require_same_shape(logits, labels.map(), "focal_loss");
    require_binary(labels, "focal_loss");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
        throw std::invalid_argument("focal_loss: gamma must be >= 0");
    }
    const int height = logits.height();
    const int width = logits.width();
    const double scale =
        reduction == LossReduction::mean ? 1.0 / static_cast<double>(logits.size()) : 1.0;
    std::vector<double> grad(logits.size(), 0.0);
    const auto mv = logits.values();
    const auto yv = labels.map().values();
    double total = 0.0;
    for (int v = 0; v < height; ++v) {
        double row = 0.0;
        const std::size_t base = static_cast<std::size_t>(v) * width;
        for (int u = 0; u < width; ++u) {
            const std::size_t i = base + u;
            const double s = yv[i] > 0.5 ? 1.0 : -1.0;
            const double z = s * mv[i];
            const double log_pt = log_sigmoid(z);
            const double pt = sigmoid(z);
            const double one_minus_pt = sigmoid(-z);
            const double w = gamma == 0.0 ? 1.0 : std::exp(gamma * log_sigmoid(-z));
            row += -w * log_pt;
            grad[i] = scale * s * (gamma * w * pt * log_pt - w * one_minus_pt);
        }
        total += row;
    }
    return LossResult{total * scale, DenseMap::from_values(height, width, std::move(grad))};
}

LossResult tversky_loss(const DenseMap& logits, const UnitIntervalMap& labels,
                        const PerspectiveConfig& config) {
    require_same_shape(logits, labels.map(), "tversky_loss");
    require_binary(labels, "tversky_loss");
    config.validate();
    const int height = logits.height();
    const int width = logits.width();
    const auto mv = logits.values();
    const auto yv = labels.map().values();

    double tp = 0.0, fp = 0.0, fn = 0.0;
    for (int v = 0; v < height; ++v) {
        double tpr = 0.0, fpr = 0.0, fnr = 0.0;
        const std::size_t base = static_cast<std::size_t>(v) * width;
        for (int u = 0; u < width; ++u) {
            const std::size_t i = base + u;
            const double p = sigmoid(mv[i]);
            const double y = yv[i];
            tpr += p * y;
            fpr += p * (1.0 - y);
            fnr += (1.0 - p) * y;
        }
        tp += tpr;
        fp += fpr;
        fn += fnr;
    }
    const double num = tp + config.epsilon;
    const double den = tp + config.alpha_fp * fp + config.alpha_fn * fn + config.epsilon;
    const double loss = 1.0 - num / den;
    const double den2 = den * den;
    const double d_tp = (num - den) / den2;
    const double d_fp = num * config.alpha_fp / den2;
    const double d_fn = num * config.alpha_fn / den2;
    std::vector<double> grad(logits.size());
    for (std::size_t i = 0; i < grad.size(); ++i) {
        const double dp = sigmoid(mv[i]) * sigmoid(-mv[i]);
        const double y = yv[i];
        grad[i] = (d_tp * y + d_fp * (1.0 - y) - d_fn * y) * dp;
    }
    return LossResult{loss, DenseMap::from_values(height, width, std::move(grad))};
}

NormalMap surface_normals(const DenseMap& depth) {
    if (depth.height() < 3 || depth.width() < 3) {
        throw std::invalid_argument("surface_normals: map must be at least 3x3");
    }
    for (double d : depth.values()) {
        if (!(d > 0.0)) {
            throw std::invalid_argument("surface_normals: depth values must be positive");
        }
    }
    const int height = depth.height();
    const int width = depth.width();
    std::vector<double> nx(depth.size());
    std::vector<double> ny(depth.size());
    std::vector<double> nz(depth.size());
    for (int v = 0; v < height; ++v) {
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
    }
    return NormalMap{DenseMap::from_values(height, width, std::move(nx)),
                     DenseMap::from_values(height, width, std::move(ny)),
                     DenseMap::from_values(height, width, std::move(nz))};
}

RgbImage gaussian_blur_rgb(const RgbImage& image, double sigma) {
    if (sigma == 0.0) {
        return image;
    }
    const int height = image.r.height();
    const int width = image.r.width();
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double norm = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        kernel[k + radius] = std::exp(-0.5 * (k * k) / (sigma * sigma));
        norm += kernel[k + radius];
    }
    for (double& w : kernel) {
        w /= norm;
    }
    const DenseMap* in[3] = {&image.r, &image.g, &image.b};
    std::vector<double> tmp[3];
    std::vector<double> out[3];
    for (int c = 0; c < 3; ++c) {
        tmp[c].resize(image.r.size());
        out[c].resize(image.r.size());
    }
    for (int v = 0; v < height; ++v) {
        for (int u = 0; u < width; ++u) {
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int k = -radius; k <= radius; ++k) {
                    acc += kernel[k + radius] * in[c]->at(v, std::clamp(u + k, 0, width - 1));
                }
                tmp[c][static_cast<std::size_t>(v) * width + u] = acc;
            }
        }
    }
    for (int v = 0; v < height; ++v) {
        for (int u = 0; u < width; ++u) {
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int k = -radius; k <= radius; ++k) {
                    const int vv = std::clamp(v + k, 0, height - 1);
                    acc += kernel[k + radius] * tmp[c][static_cast<std::size_t>(vv) * width + u];
                }
                out[c][static_cast<std::size_t>(v) * width + u] = clamp01(acc);
            }
        }
    }
    return RgbImage{DenseMap::from_values(height, width, std::move(out[0])),
                    DenseMap::from_values(height, width, std::move(out[1])),
                    DenseMap::from_values(height, width, std::move(out[2]))};
}

}  // namespace trav::reference
