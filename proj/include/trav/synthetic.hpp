#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "trav/dense_map.hpp"
#include "trav/image_io.hpp"
#include "trav/model.hpp"

namespace trav {

enum class Preset { easy, ambiguous_boundary, slope_hazard, elevated_obstacle, mixed };

Preset preset_from_string(const std::string& name);
std::string to_string(Preset preset);

struct SceneParams {
    std::uint64_t rng_seed = 1;
    int height = 64;
    int width = 64;
    Preset preset = Preset::mixed;
    double amplitude = 2.0;       // terrain height scale, depth units
    double smoothness = 1.0;      // larger = longer terrain wavelengths
    double band_width = 6.0;      // ambiguity band width, pixels (0 disables)
    int obstacle_count = 3;
    double obstacle_height_min = 1.0;
    double obstacle_height_max = 2.2;
    double texture_noise = 0.02;  // albedo noise level

    static SceneParams defaults_for(Preset preset, int height, int width, std::uint64_t seed);
    void validate() const;
};

// A synthetic terrain sample with its analytic ground truth. The depth map is
// the closed-form scene depth and doubles as the frozen teacher; the oracle
// maps are evaluated from the generator's closed-form heightfield.
struct Scene {
    SceneParams params;
    RgbImage rgb;                       // quantized to the 8-bit PPM grid
    DenseMap depth;                     // positive, float32-quantized
    UnitIntervalMap label;              // binary traversability
    DenseMap oracle_heightfield;        // terrain + obstacles
    DenseMap oracle_slope;              // |gradient| of the heightfield, per pixel
    DenseMap oracle_height_above_ground;
    UnitIntervalMap ambiguity_band;     // binary band mask around the label boundary
};

// Deterministic per params (bit-identical for equal seeds).
Scene generate_scene(const SceneParams& params);

// Alternative annotation: agrees with scene.label outside the ambiguity band,
// differs stochastically (per seed) inside it.
UnitIntervalMap annotator_relabel(const Scene& scene, std::uint64_t seed);

TrainSample to_train_sample(const Scene& scene);

// Dataset directory layout: numbered scene_%04d/ subdirectories holding
// rgb.ppm, depth.dmap, label.dmap, oracle_*.dmap, plus manifest.json.
void write_dataset(const std::filesystem::path& dir, const std::vector<Scene>& scenes);
std::vector<Scene> load_dataset(const std::filesystem::path& dir);

}  // namespace trav
