#include "trav/config.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "trav/error.hpp"

namespace trav {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::string& section,
                         const std::set<std::string>& known) {
    for (const auto& [key, value] : obj.items()) {
        if (!known.contains(key)) {
            throw ConfigError("config: unknown key \"" + key + "\" in section \"" + section +
                              "\"");
        }
    }
}

const json* section(const json& root, const char* name) {
    if (!root.contains(name)) {
        return nullptr;
    }
    if (!root.at(name).is_object()) {
        throw ConfigError(std::string("config: section \"") + name + "\" must be an object");
    }
    return &root.at(name);
}

template <class T>
void read_key(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) {
        try {
            out = obj.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(std::string("config: bad value for key \"") + key + "\"");
        }
    }
}

std::array<double, 3> read_triple(const json& obj, const char* key,
                                  std::array<double, 3> fallback) {
    if (!obj.contains(key)) {
        return fallback;
    }
    const json& arr = obj.at(key);
    if (!arr.is_array() || arr.size() != 3) {
        throw ConfigError(std::string("config: key \"") + key +
                          "\" must be an array of 3 numbers");
    }
    std::array<double, 3> out{};
    for (int i = 0; i < 3; ++i) {
        try {
            out[i] = arr.at(i).get<double>();
        } catch (const json::exception&) {
            throw ConfigError(std::string("config: bad value in \"") + key + "\"");
        }
    }
    return out;
}

}  // namespace

RunConfig RunConfig::defaults() { return RunConfig{}; }

TrainConfig RunConfig::resolved_train_config() const {
    TrainConfig cfg = train;
    cfg.loss.perspectives = perspectives;
    cfg.loss.reduction = reduction;
    cfg.loss.geo_weights = geo_weights;
    cfg.geometry_beta = beta;
    cfg.teacher_noise_sigma = teacher_noise_sigma;
    return cfg;
}

RunConfig RunConfig::from_json_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!root.is_object()) {
        throw ConfigError("config: top level must be an object");
    }
    reject_unknown_keys(root, "(top level)",
                        {"pdt", "uncertainty", "geometry", "geo_loss", "train", "eval", "data"});

    RunConfig cfg;
    if (const json* pdt = section(root, "pdt")) {
        reject_unknown_keys(*pdt, "pdt", {"gamma", "alpha_fp", "alpha_fn", "epsilon", "reduction"});
        const auto gamma = read_triple(*pdt, "gamma", {0.2, 0.5, 0.8});
        const auto alpha_fp = read_triple(*pdt, "alpha_fp", {3.0, 1.0, 0.3});
        const auto alpha_fn = read_triple(*pdt, "alpha_fn", {0.3, 1.0, 3.0});
        double epsilon = 1e-6;
        read_key(*pdt, "epsilon", epsilon);
        for (int k = 0; k < 3; ++k) {
            cfg.perspectives[k] = PerspectiveConfig{gamma[k], alpha_fp[k], alpha_fn[k], epsilon};
            cfg.perspectives[k].validate();
        }
        std::string reduction = "mean";
        read_key(*pdt, "reduction", reduction);
        if (reduction == "mean") {
            cfg.reduction = LossReduction::mean;
        } else if (reduction == "sum") {
            cfg.reduction = LossReduction::sum;
        } else {
            throw ConfigError("config: pdt.reduction must be \"mean\" or \"sum\"");
        }
    }
    if (const json* unc = section(root, "uncertainty")) {
        reject_unknown_keys(*unc, "uncertainty", {"alpha", "epsilon"});
        read_key(*unc, "alpha", cfg.alpha);
        read_key(*unc, "epsilon", cfg.uncertainty_epsilon);
        if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0) || !(cfg.uncertainty_epsilon > 0.0)) {
            throw ConfigError("config: uncertainty.alpha must be in [0,1], epsilon > 0");
        }
    }
    if (const json* geom = section(root, "geometry")) {
        reject_unknown_keys(*geom, "geometry", {"beta"});
        read_key(*geom, "beta", cfg.beta);
        if (!(cfg.beta > 0.0)) {
            throw ConfigError("config: geometry.beta must be > 0");
        }
    }
    if (const json* geo = section(root, "geo_loss")) {
        reject_unknown_keys(*geo, "geo_loss",
                            {"lambda_slope", "lambda_elev", "lambda_geo", "teacher_noise_sigma"});
        read_key(*geo, "lambda_slope", cfg.geo_weights.lambda_slope);
        read_key(*geo, "lambda_elev", cfg.geo_weights.lambda_elev);
        read_key(*geo, "lambda_geo", cfg.geo_weights.lambda_geo);
        read_key(*geo, "teacher_noise_sigma", cfg.teacher_noise_sigma);
        cfg.geo_weights.validate();
        if (cfg.teacher_noise_sigma < 0.0) {
            throw ConfigError("config: geo_loss.teacher_noise_sigma must be >= 0");
        }
    }
    if (const json* tr = section(root, "train")) {
        reject_unknown_keys(*tr, "train",
                            {"epochs", "batch_size", "lr_tokens", "lr_depth_head", "weight_decay",
                             "beta1", "beta2", "adam_eps", "rng_seed", "d_tok", "hidden_dim",
                             "n_prompt"});
        read_key(*tr, "epochs", cfg.train.epochs);
        read_key(*tr, "batch_size", cfg.train.batch_size);
        read_key(*tr, "lr_tokens", cfg.train.lr_tokens);
        read_key(*tr, "lr_depth_head", cfg.train.lr_depth_head);
        read_key(*tr, "weight_decay", cfg.train.weight_decay);
        read_key(*tr, "beta1", cfg.train.beta1);
        read_key(*tr, "beta2", cfg.train.beta2);
        read_key(*tr, "adam_eps", cfg.train.adam_eps);
        read_key(*tr, "rng_seed", cfg.train.rng_seed);
        read_key(*tr, "d_tok", cfg.train.dims.d_tok);
        read_key(*tr, "hidden_dim", cfg.train.dims.hidden);
        read_key(*tr, "n_prompt", cfg.train.dims.n_prompt);
    }
    if (const json* ev = section(root, "eval")) {
        reject_unknown_keys(*ev, "eval", {"tau", "aggregation"});
        read_key(*ev, "tau", cfg.tau);
        if (!(cfg.tau > 0.0 && cfg.tau < 1.0)) {
            throw ConfigError("config: eval.tau must be in (0, 1)");
        }
        std::string agg = "micro";
        read_key(*ev, "aggregation", agg);
        if (agg == "micro") {
            cfg.aggregation = Aggregation::micro;
        } else if (agg == "macro") {
            cfg.aggregation = Aggregation::macro;
        } else {
            throw ConfigError("config: eval.aggregation must be \"micro\" or \"macro\"");
        }
    }
    {
        // data defaults depend on the preset, so resolve the preset first
        std::string preset_name = "mixed";
        int height = 64;
        int width = 64;
        std::uint64_t seed = 1;
        if (const json* data = section(root, "data")) {
            reject_unknown_keys(*data, "data",
                                {"preset", "height", "width", "rng_seed", "amplitude",
                                 "smoothness", "band_width", "obstacle_count",
                                 "obstacle_height_min", "obstacle_height_max", "texture_noise"});
            read_key(*data, "preset", preset_name);
            read_key(*data, "height", height);
            read_key(*data, "width", width);
            read_key(*data, "rng_seed", seed);
        }
        cfg.data = SceneParams::defaults_for(preset_from_string(preset_name), height, width, seed);
        if (const json* data = section(root, "data")) {
            read_key(*data, "amplitude", cfg.data.amplitude);
            read_key(*data, "smoothness", cfg.data.smoothness);
            read_key(*data, "band_width", cfg.data.band_width);
            read_key(*data, "obstacle_count", cfg.data.obstacle_count);
            read_key(*data, "obstacle_height_min", cfg.data.obstacle_height_min);
            read_key(*data, "obstacle_height_max", cfg.data.obstacle_height_max);
            read_key(*data, "texture_noise", cfg.data.texture_noise);
        }
        cfg.data.validate();
    }
    cfg.resolved_train_config().validate();
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("config: cannot open " + path.string());
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_text(text);
}

std::string RunConfig::to_json_text() const {
    json root;
    root["pdt"] = {
        {"gamma", {perspectives[0].gamma, perspectives[1].gamma, perspectives[2].gamma}},
        {"alpha_fp",
         {perspectives[0].alpha_fp, perspectives[1].alpha_fp, perspectives[2].alpha_fp}},
        {"alpha_fn",
         {perspectives[0].alpha_fn, perspectives[1].alpha_fn, perspectives[2].alpha_fn}},
        {"epsilon", perspectives[0].epsilon},
        {"reduction", reduction == LossReduction::mean ? "mean" : "sum"}};
    root["uncertainty"] = {{"alpha", alpha}, {"epsilon", uncertainty_epsilon}};
    root["geometry"] = {{"beta", beta}};
    root["geo_loss"] = {{"lambda_slope", geo_weights.lambda_slope},
                        {"lambda_elev", geo_weights.lambda_elev},
                        {"lambda_geo", geo_weights.lambda_geo},
                        {"teacher_noise_sigma", teacher_noise_sigma}};
    root["train"] = {{"epochs", train.epochs},
                     {"batch_size", train.batch_size},
                     {"lr_tokens", train.lr_tokens},
                     {"lr_depth_head", train.lr_depth_head},
                     {"weight_decay", train.weight_decay},
                     {"beta1", train.beta1},
                     {"beta2", train.beta2},
                     {"adam_eps", train.adam_eps},
                     {"rng_seed", train.rng_seed},
                     {"d_tok", train.dims.d_tok},
                     {"hidden_dim", train.dims.hidden},
                     {"n_prompt", train.dims.n_prompt}};
    root["eval"] = {{"tau", tau},
                    {"aggregation", aggregation == Aggregation::micro ? "micro" : "macro"}};
    root["data"] = {{"preset", to_string(data.preset)},
                    {"height", data.height},
                    {"width", data.width},
                    {"rng_seed", data.rng_seed},
                    {"amplitude", data.amplitude},
                    {"smoothness", data.smoothness},
                    {"band_width", data.band_width},
                    {"obstacle_count", data.obstacle_count},
                    {"obstacle_height_min", data.obstacle_height_min},
                    {"obstacle_height_max", data.obstacle_height_max},
                    {"texture_noise", data.texture_noise}};
    return root.dump(2) + "\n";
}

void RunConfig::echo(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("config: cannot write resolved config to " + path.string());
    }
    out << to_json_text();
}

}  // namespace trav
