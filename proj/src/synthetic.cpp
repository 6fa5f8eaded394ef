#include "trav/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "trav/error.hpp"
#include "trav/math_util.hpp"
#include "trav/parallel.hpp"
#include "trav/rng.hpp"

namespace trav {

namespace {

using nlohmann::json;

constexpr int kMarginPx = 3;
constexpr double kSlopeLabelThreshold = 0.5;  // |dZ| per pixel
constexpr double kElevLabelThreshold = 0.3;   // depth units above local terrain
constexpr double kDepthNear = 8.0;
constexpr double kDepthRowGain = 6.0;
constexpr double kObstacleAlbedoBlend = 0.35;

constexpr double kGroundAlbedo[3] = {0.33, 0.55, 0.24};
constexpr double kVegAlbedo[3] = {0.17, 0.32, 0.13};
constexpr double kRockAlbedo[3] = {0.46, 0.40, 0.30};

struct WaveComponent {
    double a;
    double fu;  // cycles across the image width
    double fv;
    double phase;
};

std::vector<WaveComponent> draw_waves(Rng& rng, int count, double f_lo, double f_hi) {
    std::vector<WaveComponent> waves(count);
    double norm = 0.0;
    for (int j = 0; j < count; ++j) {
        waves[j].a = 1.0 / (1.0 + j);
        norm += waves[j].a;
        waves[j].fu = rng.uniform(f_lo, f_hi) * (rng.uniform01() < 0.5 ? -1.0 : 1.0);
        waves[j].fv = rng.uniform(f_lo, f_hi) * (rng.uniform01() < 0.5 ? -1.0 : 1.0);
        waves[j].phase = rng.uniform(0.0, 2.0 * M_PI);
    }
    for (auto& w : waves) {
        w.a /= norm;
    }
    return waves;
}

struct Bump {
    double cu;
    double cv;
    double radius;
    double height;
};

// value and per-pixel-unit gradient of the wave sum at (u, v)
struct FieldSample {
    double value;
    double du;
    double dv;
};

FieldSample sample_waves(const std::vector<WaveComponent>& waves, double u_hat, double v_hat,
                         double inv_w, double inv_h) {
    FieldSample s{0.0, 0.0, 0.0};
    for (const auto& w : waves) {
        const double arg = 2.0 * M_PI * (w.fu * u_hat + w.fv * v_hat) + w.phase;
        s.value += w.a * std::cos(arg);
        const double d = -w.a * std::sin(arg) * 2.0 * M_PI;
        s.du += d * w.fu * inv_w;
        s.dv += d * w.fv * inv_h;
    }
    return s;
}

// truncated quartic bump: h0 * (1 - (r/R)^2)^2 inside radius R
FieldSample sample_bumps(const std::vector<Bump>& bumps, double u, double v) {
    FieldSample s{0.0, 0.0, 0.0};
    for (const auto& b : bumps) {
        const double dx = u - b.cu;
        const double dy = v - b.cv;
        const double q = (dx * dx + dy * dy) / (b.radius * b.radius);
        if (q < 1.0) {
            const double one_minus = 1.0 - q;
            s.value += b.height * one_minus * one_minus;
            const double coeff = -4.0 * b.height * one_minus / (b.radius * b.radius);
            s.du += coeff * dx;
            s.dv += coeff * dy;
        }
    }
    return s;
}

struct SceneFields {
    std::vector<WaveComponent> terrain;
    std::vector<WaveComponent> vegetation;
    std::vector<Bump> bumps;
    bool veg_active = false;
    double band_level = 0.0;  // vegetation-field units
};

bool vegetation_enabled(Preset p) {
    return p == Preset::ambiguous_boundary || p == Preset::mixed;
}

SceneFields build_fields(const SceneParams& params) {
    SceneFields fields;
    const double f_lo = 0.5 / params.smoothness;
    const double f_hi = 2.5 / params.smoothness;
    {
        Rng rng(mix_seed(params.rng_seed, 1));
        fields.terrain = draw_waves(rng, 6, f_lo, f_hi);
    }
    fields.veg_active = vegetation_enabled(params.preset);
    if (fields.veg_active) {
        Rng rng(mix_seed(params.rng_seed, 2));
        fields.vegetation = draw_waves(rng, 5, 0.4, 1.6);
    }
    if (params.obstacle_count > 0) {
        Rng rng(mix_seed(params.rng_seed, 3));
        fields.bumps.resize(params.obstacle_count);
        const double min_dim = std::min(params.height, params.width);
        for (auto& b : fields.bumps) {
            b.cu = rng.uniform(0.15, 0.85) * (params.width - 1);
            b.cv = rng.uniform(0.15, 0.85) * (params.height - 1);
            b.radius = rng.uniform(0.09, 0.15) * min_dim;
            b.height = rng.uniform(params.obstacle_height_min, params.obstacle_height_max);
        }
    }
    if (fields.veg_active && params.band_width > 0.0) {
        // convert the requested pixel band width into vegetation-field units
        // via the mean analytic gradient magnitude of the field
        const double inv_w = 1.0 / (params.width - 1);
        const double inv_h = 1.0 / (params.height - 1);
        double grad_sum = 0.0;
        for (int v = 0; v < params.height; ++v) {
            for (int u = 0; u < params.width; ++u) {
                const FieldSample s =
                    sample_waves(fields.vegetation, u * inv_w, v * inv_h, inv_w, inv_h);
                grad_sum += std::sqrt(s.du * s.du + s.dv * s.dv);
            }
        }
        const double mean_grad =
            grad_sum / (static_cast<double>(params.height) * params.width);
        fields.band_level = 0.5 * params.band_width * mean_grad;
    }
    return fields;
}

// smooth perturbation field in [-1, 1] used to jitter the label boundary
std::vector<double> delta_field(const SceneParams& params, std::uint64_t seed) {
    Rng rng(mix_seed(seed, 5));
    const std::vector<WaveComponent> waves = draw_waves(rng, 4, 0.8, 2.5);
    const double inv_w = 1.0 / (params.width - 1);
    const double inv_h = 1.0 / (params.height - 1);
    std::vector<double> delta(static_cast<std::size_t>(params.height) * params.width);
    double max_abs = 0.0;
    for (int v = 0; v < params.height; ++v) {
        for (int u = 0; u < params.width; ++u) {
            const FieldSample s = sample_waves(waves, u * inv_w, v * inv_h, inv_w, inv_h);
            delta[static_cast<std::size_t>(v) * params.width + u] = s.value;
            max_abs = std::max(max_abs, std::abs(s.value));
        }
    }
    if (max_abs > 0.0) {
        for (double& d : delta) {
            d /= max_abs;
        }
    }
    return delta;
}

double quantize_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

double quantize_byte(double x) { return std::lround(clamp01(x) * 255.0) / 255.0; }

// label factors that do not depend on the annotation draw
struct GeometrySamples {
    std::vector<double> height;      // terrain + obstacles
    std::vector<double> slope_mag;   // analytic |gradient|
    std::vector<double> obstacle;    // height above local terrain
    std::vector<double> veg;         // vegetation field (0 when inactive)
    std::vector<double> terrain_du, terrain_dv;  // full-height gradient for shading
};

GeometrySamples sample_geometry(const SceneParams& params, const SceneFields& fields) {
    const int height = params.height;
    const int width = params.width;
    const std::size_t n = static_cast<std::size_t>(height) * width;
    GeometrySamples g;
    g.height.resize(n);
    g.slope_mag.resize(n);
    g.obstacle.resize(n);
    g.veg.assign(n, 0.0);
    g.terrain_du.resize(n);
    g.terrain_dv.resize(n);
    const double inv_w = 1.0 / (width - 1);
    const double inv_h = 1.0 / (height - 1);
    parallel_rows(height, [&](int v) {
        for (int u = 0; u < width; ++u) {
            const std::size_t i = static_cast<std::size_t>(v) * width + u;
            const FieldSample t = sample_waves(fields.terrain, u * inv_w, v * inv_h, inv_w, inv_h);
            const FieldSample o = sample_bumps(fields.bumps, u, v);
            const double zu = params.amplitude * t.du + o.du;
            const double zv = params.amplitude * t.dv + o.dv;
            g.height[i] = params.amplitude * t.value + o.value;
            g.slope_mag[i] = std::sqrt(zu * zu + zv * zv);
            g.obstacle[i] = o.value;
            g.terrain_du[i] = zu;
            g.terrain_dv[i] = zv;
            if (fields.veg_active) {
                const FieldSample m =
                    sample_waves(fields.vegetation, u * inv_w, v * inv_h, inv_w, inv_h);
                g.veg[i] = m.value;
            }
        }
    });
    return g;
}

std::vector<double> compose_label(const SceneParams& params, const SceneFields& fields,
                                  const GeometrySamples& g, std::uint64_t delta_seed) {
    const int height = params.height;
    const int width = params.width;
    std::vector<double> delta;
    if (fields.veg_active && fields.band_level > 0.0) {
        delta = delta_field(params, delta_seed);
    }
    std::vector<double> label(g.height.size());
    for (int v = 0; v < height; ++v) {
        for (int u = 0; u < width; ++u) {
            const std::size_t i = static_cast<std::size_t>(v) * width + u;
            const int edge = std::min(std::min(u, width - 1 - u), std::min(v, height - 1 - v));
            bool ok = edge >= kMarginPx;
            ok = ok && g.slope_mag[i] <= kSlopeLabelThreshold;
            ok = ok && g.obstacle[i] <= kElevLabelThreshold;
            if (fields.veg_active) {
                double threshold = 0.0;
                if (!delta.empty() && std::abs(g.veg[i]) < fields.band_level) {
                    threshold = 0.95 * fields.band_level * delta[i];
                }
                ok = ok && g.veg[i] <= threshold;
            }
            label[i] = ok ? 1.0 : 0.0;
        }
    }
    return label;
}

}  // namespace

Preset preset_from_string(const std::string& name) {
    if (name == "easy") return Preset::easy;
    if (name == "ambiguous_boundary") return Preset::ambiguous_boundary;
    if (name == "slope_hazard") return Preset::slope_hazard;
    if (name == "elevated_obstacle") return Preset::elevated_obstacle;
    if (name == "mixed") return Preset::mixed;
    throw ConfigError("unknown preset \"" + name + "\"");
}

std::string to_string(Preset preset) {
    switch (preset) {
        case Preset::easy: return "easy";
        case Preset::ambiguous_boundary: return "ambiguous_boundary";
        case Preset::slope_hazard: return "slope_hazard";
        case Preset::elevated_obstacle: return "elevated_obstacle";
        case Preset::mixed: return "mixed";
    }
    throw std::invalid_argument("to_string: bad preset");
}

SceneParams SceneParams::defaults_for(Preset preset, int height, int width, std::uint64_t seed) {
    SceneParams p;
    p.rng_seed = seed;
    p.height = height;
    p.width = width;
    p.preset = preset;
    switch (preset) {
        case Preset::easy:
            p.amplitude = 0.0;
            p.smoothness = 1.0;
            p.band_width = 0.0;
            p.obstacle_count = 0;
            p.obstacle_height_min = p.obstacle_height_max = 0.0;
            break;
        case Preset::ambiguous_boundary:
            p.amplitude = 0.6;
            p.smoothness = 1.2;
            p.band_width = 7.0;
            p.obstacle_count = 0;
            p.obstacle_height_min = p.obstacle_height_max = 0.0;
            break;
        case Preset::slope_hazard:
            p.amplitude = 2.6;
            p.smoothness = 0.8;
            p.band_width = 0.0;
            p.obstacle_count = 0;
            p.obstacle_height_min = p.obstacle_height_max = 0.0;
            break;
        case Preset::elevated_obstacle:
            p.amplitude = 0.25;
            p.smoothness = 1.4;
            p.band_width = 0.0;
            p.obstacle_count = 5;
            p.obstacle_height_min = 1.2;
            p.obstacle_height_max = 2.4;
            break;
        case Preset::mixed:
            // gentle terrain so elevation risk is carried by the obstacles,
            // which have an appearance correlate the risk head can learn
            p.amplitude = 0.25;
            p.smoothness = 1.2;
            p.band_width = 6.0;
            p.obstacle_count = 4;
            p.obstacle_height_min = 1.5;
            p.obstacle_height_max = 3.0;
            break;
    }
    return p;
}

void SceneParams::validate() const {
    if (height < 16 || width < 16) {
        throw ConfigError("SceneParams: dimensions must be at least 16");
    }
    if (band_width < 0.0) {
        throw ConfigError("SceneParams: band_width must be >= 0");
    }
    if (amplitude < 0.0 || !(smoothness > 0.0)) {
        throw ConfigError("SceneParams: amplitude >= 0 and smoothness > 0 required");
    }
    if (obstacle_count < 0 || obstacle_height_min < 0.0 ||
        obstacle_height_max < obstacle_height_min) {
        throw ConfigError("SceneParams: bad obstacle settings");
    }
    if (texture_noise < 0.0) {
        throw ConfigError("SceneParams: texture_noise must be >= 0");
    }
}

Scene generate_scene(const SceneParams& params) {
    params.validate();
    const SceneFields fields = build_fields(params);
    const GeometrySamples g = sample_geometry(params, fields);
    const int height = params.height;
    const int width = params.width;
    const std::size_t n = g.height.size();

    std::vector<double> label = compose_label(params, fields, g, params.rng_seed);

    // band mask (field-space band around the vegetation boundary)
    std::vector<double> band(n, 0.0);
    if (fields.veg_active && fields.band_level > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            band[i] = std::abs(g.veg[i]) < fields.band_level ? 1.0 : 0.0;
        }
    }

    // depth: oblique view, rows farther toward the top, elevation closer
    std::vector<double> depth(n);
    parallel_rows(height, [&](int v) {
        const double v_hat = static_cast<double>(v) / (height - 1);
        for (int u = 0; u < width; ++u) {
            const std::size_t i = static_cast<std::size_t>(v) * width + u;
            depth[i] = quantize_f32(kDepthNear + kDepthRowGain * (1.0 - v_hat) - g.height[i]);
        }
    });

    // render: albedo blend, Lambertian-style shading, border vignette, noise
    const double light[3] = {-0.40, -0.30, 0.85};
    const double light_norm =
        std::sqrt(light[0] * light[0] + light[1] * light[1] + light[2] * light[2]);
    std::vector<double> rgb[3];
    for (auto& c : rgb) {
        c.resize(n);
    }
    const double ramp = std::max(fields.band_level, 0.02);
    parallel_rows(height, [&](int v) {
        Rng noise_rng(mix_seed(params.rng_seed, 4000 + static_cast<std::uint64_t>(v)));
        for (int u = 0; u < width; ++u) {
            const std::size_t i = static_cast<std::size_t>(v) * width + u;
            double albedo[3] = {kGroundAlbedo[0], kGroundAlbedo[1], kGroundAlbedo[2]};
            if (fields.veg_active) {
                const double t = smoothstep01(0.5 + 0.5 * std::clamp(g.veg[i] / ramp, -1.0, 1.0));
                for (int c = 0; c < 3; ++c) {
                    albedo[c] = lerp(albedo[c], kVegAlbedo[c], t);
                }
            }
            if (!fields.bumps.empty()) {
                const double w = clamp01(g.obstacle[i] / 0.5) * kObstacleAlbedoBlend;
                for (int c = 0; c < 3; ++c) {
                    albedo[c] = lerp(albedo[c], kRockAlbedo[c], w);
                }
            }
            const double nu = -g.terrain_du[i];
            const double nv = -g.terrain_dv[i];
            const double inv_len = 1.0 / std::sqrt(nu * nu + nv * nv + 1.0);
            const double ndotl =
                (nu * light[0] + nv * light[1] + light[2]) * inv_len / light_norm;
            const double flat = light[2] / light_norm;
            const double shade = std::clamp(ndotl / flat, 0.2, 1.75);
            const int edge = std::min(std::min(u, width - 1 - u), std::min(v, height - 1 - v));
            const double vig = 0.25 + 0.75 * smoothstep01(edge / (kMarginPx + 1.5));
            for (int c = 0; c < 3; ++c) {
                const double noise = params.texture_noise * (2.0 * noise_rng.uniform01() - 1.0);
                rgb[c][i] = quantize_byte(albedo[c] * shade * vig + noise);
            }
        }
    });

    std::vector<double> oracle_h(n);
    std::vector<double> oracle_s(n);
    std::vector<double> oracle_o(n);
    for (std::size_t i = 0; i < n; ++i) {
        oracle_h[i] = quantize_f32(g.height[i]);
        oracle_s[i] = quantize_f32(g.slope_mag[i]);
        oracle_o[i] = quantize_f32(g.obstacle[i]);
    }

    return Scene{
        params,
        RgbImage{DenseMap::from_values(height, width, std::move(rgb[0])),
                 DenseMap::from_values(height, width, std::move(rgb[1])),
                 DenseMap::from_values(height, width, std::move(rgb[2]))},
        DenseMap::from_values(height, width, std::move(depth)),
        UnitIntervalMap(DenseMap::from_values(height, width, std::move(label))),
        DenseMap::from_values(height, width, std::move(oracle_h)),
        DenseMap::from_values(height, width, std::move(oracle_s)),
        DenseMap::from_values(height, width, std::move(oracle_o)),
        UnitIntervalMap(DenseMap::from_values(height, width, std::move(band)))};
}

UnitIntervalMap annotator_relabel(const Scene& scene, std::uint64_t seed) {
    const SceneFields fields = build_fields(scene.params);
    const GeometrySamples g = sample_geometry(scene.params, fields);
    std::vector<double> label = compose_label(scene.params, fields, g, seed);
    return UnitIntervalMap(
        DenseMap::from_values(scene.params.height, scene.params.width, std::move(label)));
}

TrainSample to_train_sample(const Scene& scene) {
    return TrainSample{scene.rgb, scene.depth, scene.label};
}

namespace {

json params_to_json(const SceneParams& p) {
    return json{{"rng_seed", p.rng_seed},
                {"height", p.height},
                {"width", p.width},
                {"preset", to_string(p.preset)},
                {"amplitude", p.amplitude},
                {"smoothness", p.smoothness},
                {"band_width", p.band_width},
                {"obstacle_count", p.obstacle_count},
                {"obstacle_height_min", p.obstacle_height_min},
                {"obstacle_height_max", p.obstacle_height_max},
                {"texture_noise", p.texture_noise}};
}

SceneParams params_from_json(const json& j) {
    SceneParams p;
    p.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    p.height = j.at("height").get<int>();
    p.width = j.at("width").get<int>();
    p.preset = preset_from_string(j.at("preset").get<std::string>());
    p.amplitude = j.at("amplitude").get<double>();
    p.smoothness = j.at("smoothness").get<double>();
    p.band_width = j.at("band_width").get<double>();
    p.obstacle_count = j.at("obstacle_count").get<int>();
    p.obstacle_height_min = j.at("obstacle_height_min").get<double>();
    p.obstacle_height_max = j.at("obstacle_height_max").get<double>();
    p.texture_noise = j.at("texture_noise").get<double>();
    return p;
}

std::string scene_dir_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "scene_%04zu", index);
    return buf;
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const std::vector<Scene>& scenes) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("write_dataset: cannot create " + dir.string());
    }
    json manifest;
    manifest["format"] = "travkit-dataset";
    manifest["version"] = 1;
    manifest["scenes"] = json::array();
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const Scene& scene = scenes[i];
        const std::string name = scene_dir_name(i);
        const std::filesystem::path sdir = dir / name;
        std::filesystem::create_directories(sdir, ec);
        if (ec) {
            throw IoError("write_dataset: cannot create " + sdir.string());
        }
        write_ppm(sdir / "rgb.ppm", scene.rgb);
        save_dmap(scene.depth, sdir / "depth.dmap");
        save_dmap(scene.label.map(), sdir / "label.dmap");
        save_dmap(scene.oracle_heightfield, sdir / "oracle_heightfield.dmap");
        save_dmap(scene.oracle_slope, sdir / "oracle_slope.dmap");
        save_dmap(scene.oracle_height_above_ground, sdir / "oracle_height.dmap");
        save_dmap(scene.ambiguity_band.map(), sdir / "oracle_band.dmap");
        json entry = params_to_json(scene.params);
        entry["index"] = i;
        entry["dir"] = name;
        manifest["scenes"].push_back(entry);
    }
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) {
        throw IoError("write_dataset: cannot write manifest.json");
    }
    out << manifest.dump(2) << "\n";
}

std::vector<Scene> load_dataset(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) {
        throw IoError("load_dataset: cannot open " + (dir / "manifest.json").string());
    }
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw FormatError(std::string("load_dataset: bad manifest: ") + e.what());
    }
    if (manifest.value("format", "") != "travkit-dataset") {
        throw FormatError("load_dataset: not a travkit dataset manifest");
    }
    std::vector<Scene> scenes;
    for (const json& entry : manifest.at("scenes")) {
        const std::filesystem::path sdir = dir / entry.at("dir").get<std::string>();
        SceneParams params = params_from_json(entry);
        RgbImage rgb = read_ppm(sdir / "rgb.ppm");
        DenseMap depth = load_dmap(sdir / "depth.dmap");
        UnitIntervalMap label(load_dmap(sdir / "label.dmap"));
        require_binary(label, "load_dataset");
        scenes.push_back(Scene{std::move(params), std::move(rgb), std::move(depth),
                               std::move(label),
                               load_dmap(sdir / "oracle_heightfield.dmap"),
                               load_dmap(sdir / "oracle_slope.dmap"),
                               load_dmap(sdir / "oracle_height.dmap"),
                               UnitIntervalMap(load_dmap(sdir / "oracle_band.dmap"))});
    }
    return scenes;
}

}  // namespace trav
