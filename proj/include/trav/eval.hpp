#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trav/dense_map.hpp"
#include "trav/image_io.hpp"
#include "trav/model.hpp"

namespace trav {

struct MetricReport {
    double iou = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;
    double tau = 0.5;
    // zero-denominator ratios are reported as 0 with the matching flag set
    bool iou_zero_denominator = false;
    bool precision_zero_denominator = false;
    bool recall_zero_denominator = false;
};

MetricReport report_from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn,
                                std::uint64_t tn, double tau);

// Pixels with score >= tau count as predicted-positive.
MetricReport binary_metrics(const UnitIntervalMap& score, const UnitIntervalMap& gt, double tau);

enum class CorruptionKind { gaussian_noise, gaussian_blur, brightness, contrast, fog_haze };

struct CorruptionSpec {
    CorruptionKind kind;
    int severity = 1;  // 1..5
};

CorruptionKind corruption_kind_from_string(const std::string& name);
std::string to_string(CorruptionKind kind);

// severity -> parameter tables (documented constants, monotone per kind)
double corruption_parameter(CorruptionKind kind, int severity);

// Parameterized primitives behind the severity tables; each is the identity
// at parameter 0.
RgbImage gaussian_noise_rgb(const RgbImage& image, double sigma, std::uint64_t seed);
RgbImage gaussian_blur_rgb(const RgbImage& image, double sigma);
RgbImage brightness_rgb(const RgbImage& image, double delta);
RgbImage contrast_rgb(const RgbImage& image, double factor_drop);
RgbImage fog_haze_rgb(const RgbImage& image, double blend);

// Deterministic per (image, spec, seed); outputs clamped to [0, 1].
RgbImage corrupt(const RgbImage& image, const CorruptionSpec& spec, std::uint64_t seed);

enum class Aggregation { micro, macro };

struct EvalSample {
    RgbImage rgb;
    UnitIntervalMap label;
};

struct DatasetReport {
    MetricReport aggregate;
    Aggregation aggregation = Aggregation::micro;
    std::vector<MetricReport> per_scene;
};

struct EvalParams {
    double tau = 0.5;
    double alpha = 0.7;       // uncertainty suppression strength
    double epsilon = 1e-6;
    Aggregation aggregation = Aggregation::micro;
    std::optional<CorruptionSpec> corruption;
    std::uint64_t corruption_seed = 0;
};

// Runs inference per scene (optionally corrupting the image first) and
// aggregates: micro pools pixel counts, macro averages per-scene ratios.
DatasetReport evaluate_dataset(const TokenBank& tokens, const std::vector<EvalSample>& scenes,
                               const EvalParams& params);

std::string report_to_json(const DatasetReport& report);
std::string report_to_text(const DatasetReport& report);

}  // namespace trav
