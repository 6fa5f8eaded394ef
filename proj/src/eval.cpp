#include "trav/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "trav/error.hpp"
#include "trav/math_util.hpp"
#include "trav/parallel.hpp"
#include "trav/rng.hpp"

namespace trav {

namespace {

using nlohmann::json;

double ratio_or_zero(std::uint64_t num, std::uint64_t den, bool& flag) {
    if (den == 0) {
        flag = true;
        return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricReport report_from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn,
                                std::uint64_t tn, double tau) {
    MetricReport r;
    r.tp = tp;
    r.fp = fp;
    r.fn = fn;
    r.tn = tn;
    r.tau = tau;
    r.iou = ratio_or_zero(tp, tp + fp + fn, r.iou_zero_denominator);
    r.precision = ratio_or_zero(tp, tp + fp, r.precision_zero_denominator);
    r.recall = ratio_or_zero(tp, tp + fn, r.recall_zero_denominator);
    return r;
}

MetricReport binary_metrics(const UnitIntervalMap& score, const UnitIntervalMap& gt, double tau) {
    require_same_shape(score.map(), gt.map(), "binary_metrics");
    require_binary(gt, "binary_metrics");
    if (!(tau > 0.0 && tau < 1.0)) {
        throw std::invalid_argument("binary_metrics: tau must be in (0, 1)");
    }
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
    const auto sv = score.map().values();
    const auto gv = gt.map().values();
    for (std::size_t i = 0; i < sv.size(); ++i) {
        const bool pred = sv[i] >= tau;
        const bool pos = gv[i] == 1.0;
        if (pred && pos) {
            ++tp;
        } else if (pred) {
            ++fp;
        } else if (pos) {
            ++fn;
        } else {
            ++tn;
        }
    }
    return report_from_counts(tp, fp, fn, tn, tau);
}

CorruptionKind corruption_kind_from_string(const std::string& name) {
    if (name == "gaussian_noise") return CorruptionKind::gaussian_noise;
    if (name == "gaussian_blur") return CorruptionKind::gaussian_blur;
    if (name == "brightness") return CorruptionKind::brightness;
    if (name == "contrast") return CorruptionKind::contrast;
    if (name == "fog_haze") return CorruptionKind::fog_haze;
    throw ConfigError("unknown corruption kind \"" + name + "\"");
}

std::string to_string(CorruptionKind kind) {
    switch (kind) {
        case CorruptionKind::gaussian_noise: return "gaussian_noise";
        case CorruptionKind::gaussian_blur: return "gaussian_blur";
        case CorruptionKind::brightness: return "brightness";
        case CorruptionKind::contrast: return "contrast";
        case CorruptionKind::fog_haze: return "fog_haze";
    }
    throw std::invalid_argument("to_string: bad corruption kind");
}

double corruption_parameter(CorruptionKind kind, int severity) {
    if (severity < 1 || severity > 5) {
        throw ConfigError("corruption severity must be in [1, 5]");
    }
    // monotone severity tables (fraction of the [0,1] dynamic range, or pixels)
    static constexpr double kNoiseSigma[5] = {0.04, 0.08, 0.12, 0.18, 0.26};
    static constexpr double kBlurSigma[5] = {0.6, 1.0, 1.6, 2.4, 3.5};
    static constexpr double kBrightnessDelta[5] = {0.08, 0.16, 0.24, 0.32, 0.42};
    static constexpr double kContrastDrop[5] = {0.20, 0.35, 0.50, 0.62, 0.72};
    static constexpr double kFogBlend[5] = {0.12, 0.24, 0.38, 0.52, 0.68};
    switch (kind) {
        case CorruptionKind::gaussian_noise: return kNoiseSigma[severity - 1];
        case CorruptionKind::gaussian_blur: return kBlurSigma[severity - 1];
        case CorruptionKind::brightness: return kBrightnessDelta[severity - 1];
        case CorruptionKind::contrast: return kContrastDrop[severity - 1];
        case CorruptionKind::fog_haze: return kFogBlend[severity - 1];
    }
    throw std::invalid_argument("corruption_parameter: bad kind");
}

namespace {

RgbImage map_channels(const RgbImage& image, auto&& fn) {
    const int height = image.r.height();
    const int width = image.r.width();
    const DenseMap* in[3] = {&image.r, &image.g, &image.b};
    std::vector<double> out[3];
    for (auto& c : out) {
        c.resize(image.r.size());
    }
    parallel_rows(height, [&](int v) {
        for (int u = 0; u < width; ++u) {
            const std::size_t i = static_cast<std::size_t>(v) * width + u;
            for (int c = 0; c < 3; ++c) {
                out[c][i] = clamp01(fn(in[c]->at(v, u), c, v, u));
            }
        }
    });
    return RgbImage{DenseMap::from_values(height, width, std::move(out[0])),
                    DenseMap::from_values(height, width, std::move(out[1])),
                    DenseMap::from_values(height, width, std::move(out[2]))};
}

}  // namespace

RgbImage gaussian_noise_rgb(const RgbImage& image, double sigma, std::uint64_t seed) {
    if (sigma == 0.0) {
        return image;
    }
    const int height = image.r.height();
    const int width = image.r.width();
    // one rng per row keeps the field deterministic under row-parallelism
    std::vector<double> noise(image.r.size() * 3);
    parallel_rows(height, [&](int v) {
        Rng rng(mix_seed(seed, 7000 + static_cast<std::uint64_t>(v)));
        for (int u = 0; u < width; ++u) {
            const std::size_t i = (static_cast<std::size_t>(v) * width + u) * 3;
            noise[i + 0] = rng.normal();
            noise[i + 1] = rng.normal();
            noise[i + 2] = rng.normal();
        }
    });
    return map_channels(image, [&](double x, int c, int v, int u) {
        return x + sigma * noise[(static_cast<std::size_t>(v) * width + u) * 3 + c];
    });
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
    // separable pass: horizontal then vertical, borders clamped
    parallel_rows(height, [&](int v) {
        for (int u = 0; u < width; ++u) {
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int k = -radius; k <= radius; ++k) {
                    acc += kernel[k + radius] * in[c]->at(v, std::clamp(u + k, 0, width - 1));
                }
                tmp[c][static_cast<std::size_t>(v) * width + u] = acc;
            }
        }
    });
    parallel_rows(height, [&](int v) {
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
    });
    return RgbImage{DenseMap::from_values(height, width, std::move(out[0])),
                    DenseMap::from_values(height, width, std::move(out[1])),
                    DenseMap::from_values(height, width, std::move(out[2]))};
}

RgbImage brightness_rgb(const RgbImage& image, double delta) {
    return map_channels(image, [&](double x, int, int, int) { return x + delta; });
}

RgbImage contrast_rgb(const RgbImage& image, double factor_drop) {
    if (factor_drop == 0.0) {
        return image;
    }
    const double factor = 1.0 - factor_drop;
    return map_channels(image,
                        [&](double x, int, int, int) { return 0.5 + factor * (x - 0.5); });
}

RgbImage fog_haze_rgb(const RgbImage& image, double blend) {
    constexpr double kFogColor = 0.82;
    const int height = image.r.height();
    return map_channels(image, [&](double x, int, int v, int) {
        // haze is heavier toward the top of the frame (farther terrain)
        const double t = blend * (0.6 + 0.4 * (1.0 - static_cast<double>(v) / (height - 1)));
        return (1.0 - t) * x + t * kFogColor;
    });
}

RgbImage corrupt(const RgbImage& image, const CorruptionSpec& spec, std::uint64_t seed) {
    const double param = corruption_parameter(spec.kind, spec.severity);
    switch (spec.kind) {
        case CorruptionKind::gaussian_noise: return gaussian_noise_rgb(image, param, seed);
        case CorruptionKind::gaussian_blur: return gaussian_blur_rgb(image, param);
        case CorruptionKind::brightness: return brightness_rgb(image, param);
        case CorruptionKind::contrast: return contrast_rgb(image, param);
        case CorruptionKind::fog_haze: return fog_haze_rgb(image, param);
    }
    throw std::invalid_argument("corrupt: bad kind");
}

DatasetReport evaluate_dataset(const TokenBank& tokens, const std::vector<EvalSample>& scenes,
                               const EvalParams& params) {
    if (scenes.empty()) {
        throw std::invalid_argument("evaluate_dataset: empty scene list");
    }
    DatasetReport report;
    report.aggregation = params.aggregation;
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const EvalSample& scene = scenes[i];
        RgbImage image = scene.rgb;
        if (params.corruption) {
            image = corrupt(image, *params.corruption,
                            mix_seed(params.corruption_seed, 9000 + i));
        }
        const TraversabilityOutput out = infer(tokens, image, params.alpha, params.epsilon);
        MetricReport r = binary_metrics(out.score, scene.label, params.tau);
        tp += r.tp;
        fp += r.fp;
        fn += r.fn;
        tn += r.tn;
        report.per_scene.push_back(r);
    }
    if (params.aggregation == Aggregation::micro) {
        report.aggregate = report_from_counts(tp, fp, fn, tn, params.tau);
    } else {
        MetricReport macro;
        macro.tau = params.tau;
        macro.tp = tp;
        macro.fp = fp;
        macro.fn = fn;
        macro.tn = tn;
        const double inv = 1.0 / static_cast<double>(report.per_scene.size());
        for (const MetricReport& r : report.per_scene) {
            macro.iou += r.iou * inv;
            macro.precision += r.precision * inv;
            macro.recall += r.recall * inv;
            macro.iou_zero_denominator |= r.iou_zero_denominator;
            macro.precision_zero_denominator |= r.precision_zero_denominator;
            macro.recall_zero_denominator |= r.recall_zero_denominator;
        }
        report.aggregate = macro;
    }
    return report;
}

namespace {

json report_to_json_obj(const MetricReport& r) {
    json flags = json::array();
    if (r.iou_zero_denominator) flags.push_back("iou_zero_denominator");
    if (r.precision_zero_denominator) flags.push_back("precision_zero_denominator");
    if (r.recall_zero_denominator) flags.push_back("recall_zero_denominator");
    return json{{"iou", r.iou},
                {"precision", r.precision},
                {"recall", r.recall},
                {"counts", json{{"tp", r.tp}, {"fp", r.fp}, {"fn", r.fn}, {"tn", r.tn}}},
                {"tau", r.tau},
                {"flags", flags}};
}

}  // namespace

std::string report_to_json(const DatasetReport& report) {
    json j = report_to_json_obj(report.aggregate);
    j["aggregation"] = report.aggregation == Aggregation::micro ? "micro" : "macro";
    j["per_scene"] = json::array();
    for (const MetricReport& r : report.per_scene) {
        j["per_scene"].push_back(report_to_json_obj(r));
    }
    return j.dump(2) + "\n";
}

std::string report_to_text(const DatasetReport& report) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-8s %8s %10s %8s %12s %12s %12s\n", "scene", "iou",
                  "precision", "recall", "tp", "fp", "fn");
    out << line;
    for (std::size_t i = 0; i < report.per_scene.size(); ++i) {
        const MetricReport& r = report.per_scene[i];
        std::snprintf(line, sizeof(line), "%-8zu %8.4f %10.4f %8.4f %12llu %12llu %12llu\n", i,
                      r.iou, r.precision, r.recall,
                      static_cast<unsigned long long>(r.tp),
                      static_cast<unsigned long long>(r.fp),
                      static_cast<unsigned long long>(r.fn));
        out << line;
    }
    const MetricReport& a = report.aggregate;
    std::snprintf(line, sizeof(line), "%-8s %8.4f %10.4f %8.4f %12llu %12llu %12llu\n",
                  report.aggregation == Aggregation::micro ? "micro" : "macro", a.iou,
                  a.precision, a.recall, static_cast<unsigned long long>(a.tp),
                  static_cast<unsigned long long>(a.fp), static_cast<unsigned long long>(a.fn));
    out << line;
    return out.str();
}

}  // namespace trav
