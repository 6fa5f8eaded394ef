#pragma once

#include <filesystem>
#include <string>

#include "trav/eval.hpp"
#include "trav/model.hpp"
#include "trav/synthetic.hpp"

namespace trav {

// JSON run configuration with sections "pdt", "uncertainty", "geometry",
// "geo_loss", "train", "eval", "data". Unknown keys are rejected; missing
// keys fall back to documented defaults; the fully resolved document can be
// echoed back out for provenance.
struct RunConfig {
    // pdt
    std::array<PerspectiveConfig, 3> perspectives = default_perspectives();
    LossReduction reduction = LossReduction::mean;
    // uncertainty
    double alpha = 0.7;
    double uncertainty_epsilon = 1e-6;
    // geometry
    double beta = 3.0;
    // geo_loss
    GeoLossWeights geo_weights;
    double teacher_noise_sigma = 0.0;
    // train
    TrainConfig train;
    // eval
    double tau = 0.5;
    Aggregation aggregation = Aggregation::micro;
    // data
    SceneParams data;

    // Builds the fully resolved TrainConfig (train section plus the loss
    // sections that feed it).
    TrainConfig resolved_train_config() const;

    static RunConfig defaults();
    static RunConfig from_json_text(const std::string& text);
    static RunConfig load(const std::filesystem::path& path);

    std::string to_json_text() const;
    void echo(const std::filesystem::path& path) const;
};

}  // namespace trav
