#pragma once

#include "trav/dense_map.hpp"
#include "trav/eval.hpp"
#include "trav/features.hpp"
#include "trav/geometry.hpp"
#include "trav/image_io.hpp"
#include "trav/model.hpp"
#include "trav/pdt_losses.hpp"

// Plain single-threaded implementations of the hot kernels, kept as the
// reference the OpenMP paths are tested against (bit-identical outputs
// required) and as the baseline for the kernel benchmark.
namespace trav::reference {

FeatureMap extract_features(const RgbImage& image);

DecodeResult decode(const TokenBank& tokens, const FeatureMap& features);

LossResult focal_loss(const DenseMap& logits, const UnitIntervalMap& labels, double gamma,
                      LossReduction reduction = LossReduction::mean);

LossResult tversky_loss(const DenseMap& logits, const UnitIntervalMap& labels,
                        const PerspectiveConfig& config);

NormalMap surface_normals(const DenseMap& depth);

RgbImage gaussian_blur_rgb(const RgbImage& image, double sigma);

}  // namespace trav::reference
