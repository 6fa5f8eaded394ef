#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "trav/dense_map.hpp"
#include "trav/features.hpp"
#include "trav/fusion.hpp"
#include "trav/geo_losses.hpp"
#include "trav/geometry.hpp"
#include "trav/image_io.hpp"
#include "trav/pdt_losses.hpp"

namespace trav {

struct ModelDims {
    int n_prompt = 4;
    int d_tok = 32;
    int hidden = 32;
    int f_dim = kFeatureDim;

    void validate() const;
    bool operator==(const ModelDims&) const = default;
};

// Head order used throughout: 0-2 semantic (con, neu, agg), 3 slope, 4 elev.
inline constexpr int kNumHeads = 5;

// All trainable state as one flat parameter vector with a fixed layout:
//   prompt tokens | semantic tokens | geometric tokens |
//   per-head MLPs (w1, b1, w2, b2 each) | depth head (w, b).
// Each head MLP maps (token + mean prompt) -> tanh hidden -> per-pixel
// projection weights of dimension f_dim; a head's logit at a pixel is the
// inner product of those weights with the pixel's features.
class TokenBank {
public:
    static TokenBank init(const ModelDims& dims, std::uint64_t seed);
    static TokenBank from_parameters(const ModelDims& dims, std::vector<double> params);

    const ModelDims& dims() const { return dims_; }
    std::size_t parameter_count() const { return params_.size(); }
    std::span<const double> parameters() const { return params_; }
    std::span<double> parameters() { return params_; }

    // layout offsets
    std::size_t prompt_offset(int i) const;
    std::size_t token_offset(int head) const;  // semantic 0-2, geometric 3-4
    std::size_t mlp_offset(int head) const;
    std::size_t mlp_size() const;
    std::size_t depth_offset() const;
    bool is_depth_param(std::size_t index) const { return index >= depth_offset(); }

    std::span<const double> prompt_token(int i) const;
    std::span<const double> token(int head) const;

private:
    TokenBank(ModelDims dims, std::vector<double> params);

    ModelDims dims_;
    std::vector<double> params_;
};

struct DecodeResult {
    std::array<DenseMap, 3> semantic_logits;
    std::array<DenseMap, 2> risk_logits;
    std::array<UnitIntervalMap, 2> risks;  // sigmoided slope, elev
    DenseMap depth;
};

DecodeResult decode(const TokenBank& tokens, const FeatureMap& features);

// Versioned binary checkpoint: magic "VTKB", format version, dimensions
// block, then parameters as 64-bit little-endian floats in layout order.
void save_checkpoint(const std::filesystem::path& path, const TokenBank& tokens);
TokenBank load_checkpoint(const std::filesystem::path& path);

struct TrainSample {
    RgbImage rgb;
    DenseMap depth;          // teacher depth (training only)
    UnitIntervalMap label;   // binary traversability
};

// Per-sample state that does not depend on parameters: features, geometric
// pseudo-labels from the teacher depth, and the (optionally noised) teacher.
struct PreparedSample {
    FeatureMap features;
    UnitIntervalMap label;
    UnitIntervalMap pseudo_slope;
    UnitIntervalMap pseudo_elev;
    DenseMap teacher_depth;
};

PreparedSample prepare_sample(const TrainSample& sample, double beta, double teacher_noise_sigma,
                              std::uint64_t noise_seed);

struct LossParams {
    std::array<PerspectiveConfig, 3> perspectives = default_perspectives();
    LossReduction reduction = LossReduction::mean;
    GeoLossWeights geo_weights;
};

struct LossBreakdown {
    std::array<double, 3> per_token{};  // L_con, L_neu, L_agg
    double sem = 0.0;
    double geo = 0.0;
    double distill = 0.0;
    double total = 0.0;
};

// Full training objective for one sample. When grad_accum is non-null it must
// have parameter_count() entries; scaled gradients are accumulated into it.
LossBreakdown model_loss(const TokenBank& tokens, const PreparedSample& sample,
                         const LossParams& params, std::vector<double>* grad_accum,
                         double grad_scale);

struct TrainConfig {
    int epochs = 10;
    int batch_size = 8;
    double lr_tokens = 5e-4;
    double lr_depth_head = 5e-4;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t rng_seed = 1;
    ModelDims dims;
    LossParams loss;
    double geometry_beta = 3.0;
    double teacher_noise_sigma = 0.0;

    void validate() const;
};

struct EpochLog {
    double l_con = 0.0;
    double l_neu = 0.0;
    double l_agg = 0.0;
    double l_geo = 0.0;
    double l_distill = 0.0;
    double total = 0.0;
};

struct TrainResult {
    TokenBank tokens;
    std::vector<EpochLog> log;
};

// AdamW (decoupled weight decay) with cosine-annealed learning rate.
// Bit-reproducible for a given rng_seed: fixed shuffle, fixed reduction order.
TrainResult train(const std::vector<TrainSample>& dataset, const TrainConfig& config);

// extract_features -> decode -> uncertainty -> fuse.
TraversabilityOutput infer(const TokenBank& tokens, const RgbImage& image, double alpha,
                           double epsilon);

}  // namespace trav
