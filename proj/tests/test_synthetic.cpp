#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "support/oracles.hpp"
#include "support/probe.hpp"
#include "trav/error.hpp"
#include "trav/eval.hpp"
#include "trav/geometry.hpp"
#include "trav/synthetic.hpp"

using namespace trav;
namespace fs = std::filesystem;

TEST_CASE("easy preset is flat and traversable except the border margin") {
    const Scene scene = generate_scene(SceneParams::defaults_for(Preset::easy, 32, 32, 4));
    for (int v = 0; v < 32; ++v) {
        for (int u = 0; u < 32; ++u) {
            const int edge = std::min(std::min(u, 31 - u), std::min(v, 31 - v));
            CHECK(scene.label.at(v, u) == (edge >= 3 ? 1.0 : 0.0));
            CHECK(std::abs(scene.oracle_slope.at(v, u)) < 1e-9);
        }
    }
    for (double v : scene.ambiguity_band.map().values()) {
        CHECK(v == 0.0);
    }
    for (double d : scene.depth.values()) {
        CHECK(d > 0.0);
    }
}

TEST_CASE("generation is deterministic per seed") {
    const SceneParams params = SceneParams::defaults_for(Preset::mixed, 32, 32, 77);
    const Scene a = generate_scene(params);
    const Scene b = generate_scene(params);
    auto same = [](const DenseMap& x, const DenseMap& y) {
        REQUIRE(x.size() == y.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x.values()[i] != y.values()[i]) {
                return false;
            }
        }
        return true;
    };
    CHECK(same(a.rgb.r, b.rgb.r));
    CHECK(same(a.rgb.g, b.rgb.g));
    CHECK(same(a.rgb.b, b.rgb.b));
    CHECK(same(a.depth, b.depth));
    CHECK(same(a.label.map(), b.label.map()));
    CHECK(same(a.oracle_slope, b.oracle_slope));

    const Scene c = generate_scene(SceneParams::defaults_for(Preset::mixed, 32, 32, 78));
    CHECK_FALSE(same(a.rgb.r, c.rgb.r));
}

TEST_CASE("doubling the amplitude doubles the analytic slope exactly") {
    SceneParams params = SceneParams::defaults_for(Preset::slope_hazard, 32, 32, 5);
    params.amplitude = 1.1;
    const Scene base = generate_scene(params);
    params.amplitude = 2.2;
    const Scene doubled = generate_scene(params);
    for (std::size_t i = 0; i < base.oracle_slope.size(); ++i) {
        CHECK(doubled.oracle_slope.values()[i] == 2.0 * base.oracle_slope.values()[i]);
    }
}

TEST_CASE("annotator relabel stays inside the ambiguity band") {
    const Scene scene =
        generate_scene(SceneParams::defaults_for(Preset::ambiguous_boundary, 48, 48, 11));
    // the band is non-empty on this preset
    double band_pixels = 0.0;
    for (double v : scene.ambiguity_band.map().values()) {
        band_pixels += v;
    }
    CHECK(band_pixels > 0.0);

    bool any_disagreement = false;
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
        const UnitIntervalMap relabel = annotator_relabel(scene, seed);
        for (int v = 0; v < 48; ++v) {
            for (int u = 0; u < 48; ++u) {
                if (relabel.at(v, u) != scene.label.at(v, u)) {
                    any_disagreement = true;
                    CHECK(scene.ambiguity_band.at(v, u) == 1.0);
                }
            }
        }
    }
    CHECK(any_disagreement);

    // two different annotator draws differ from each other inside the band
    const UnitIntervalMap r1 = annotator_relabel(scene, 1);
    const UnitIntervalMap r2 = annotator_relabel(scene, 2);
    bool differ = false;
    for (std::size_t i = 0; i < r1.map().size(); ++i) {
        differ |= r1.map().values()[i] != r2.map().values()[i];
    }
    CHECK(differ);
}

TEST_CASE("band width zero reproduces the original label") {
    SceneParams params = SceneParams::defaults_for(Preset::ambiguous_boundary, 32, 32, 13);
    params.band_width = 0.0;
    const Scene scene = generate_scene(params);
    const UnitIntervalMap relabel = annotator_relabel(scene, 999);
    for (std::size_t i = 0; i < relabel.map().size(); ++i) {
        CHECK(relabel.map().values()[i] == scene.label.map().values()[i]);
    }
}

TEST_CASE("easy labels are perfectly learnable by a logistic probe") {
    const Scene scene = generate_scene(SceneParams::defaults_for(Preset::easy, 48, 48, 21));
    const FeatureMap features = extract_features(scene.rgb);
    const auto probe = testing::train_logistic_probe(features, scene.label);
    const MetricReport r = binary_metrics(probe.prediction, scene.label, 0.5);
    CHECK(r.iou > 0.95);
}

TEST_CASE("elevation pipeline rank-agrees with the analytic heights") {
    const Scene scene =
        generate_scene(SceneParams::defaults_for(Preset::elevated_obstacle, 64, 64, 31));
    const GroundPlane plane = fit_ground_plane(scene.depth, scene.label);
    std::vector<double> pipeline;
    std::vector<double> analytic;
    for (int v = 0; v < 64; ++v) {
        for (int u = 0; u < 64; ++u) {
            const double h_true = scene.oracle_height_above_ground.at(v, u);
            if (h_true > 1e-6) {  // non-ground pixels
                analytic.push_back(h_true);
                pipeline.push_back(
                    std::max(0.0, plane.signed_height(u, v, scene.depth.at(v, u))));
            }
        }
    }
    REQUIRE(analytic.size() > 100);
    CHECK(testing::spearman(pipeline, analytic) > 0.9);
}

TEST_CASE("dataset round-trips through disk bit-exactly") {
    std::vector<Scene> scenes;
    scenes.push_back(generate_scene(SceneParams::defaults_for(Preset::mixed, 24, 24, 41)));
    scenes.push_back(generate_scene(SceneParams::defaults_for(Preset::easy, 24, 24, 42)));
    const fs::path dir = fs::temp_directory_path() / "travkit_test_dataset";
    fs::remove_all(dir);
    write_dataset(dir, scenes);
    const std::vector<Scene> loaded = load_dataset(dir);
    REQUIRE(loaded.size() == 2);
    for (std::size_t s = 0; s < 2; ++s) {
        CHECK(loaded[s].params.rng_seed == scenes[s].params.rng_seed);
        CHECK(loaded[s].params.preset == scenes[s].params.preset);
        for (std::size_t i = 0; i < scenes[s].depth.size(); ++i) {
            CHECK(loaded[s].rgb.r.values()[i] == scenes[s].rgb.r.values()[i]);
            CHECK(loaded[s].depth.values()[i] == scenes[s].depth.values()[i]);
            CHECK(loaded[s].label.map().values()[i] == scenes[s].label.map().values()[i]);
            CHECK(loaded[s].oracle_slope.values()[i] == scenes[s].oracle_slope.values()[i]);
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("scene params are validated") {
    SceneParams params = SceneParams::defaults_for(Preset::easy, 32, 32, 1);
    params.height = 8;
    CHECK_THROWS_AS(generate_scene(params), ConfigError);
    params = SceneParams::defaults_for(Preset::easy, 32, 32, 1);
    params.band_width = -1.0;
    CHECK_THROWS_AS(generate_scene(params), ConfigError);
    CHECK_THROWS_AS(preset_from_string("bogus"), ConfigError);
}
