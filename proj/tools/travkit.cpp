#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trav/config.hpp"
#include "trav/error.hpp"
#include "trav/eval.hpp"
#include "trav/image_io.hpp"
#include "trav/model.hpp"
#include "trav/synthetic.hpp"

namespace {

namespace fs = std::filesystem;
using namespace trav;

struct GenDataArgs {
    std::string config;
    std::string out;
    int count = 1;
};

struct TrainArgs {
    std::string config;
    std::string data;
    std::string out;
    std::string log;
};

struct InferArgs {
    std::string ckpt;
    std::string image;
    std::string config;
    std::string score_out;
    std::string depth_out;
    std::string all_maps;
};

struct EvalArgs {
    std::string ckpt;
    std::string data;
    std::string config;
    std::string report;
    double tau = 0.5;
    bool tau_given = false;
    std::string corrupt;
    std::uint64_t corrupt_seed = 0;
};

RunConfig load_config_or_defaults(const std::string& path) {
    return path.empty() ? RunConfig::defaults() : RunConfig::load(path);
}

void run_gen_data(const GenDataArgs& args) {
    const RunConfig cfg = RunConfig::load(args.config);
    if (args.count < 1) {
        throw ConfigError("gen-data: --count must be >= 1");
    }
    std::vector<Scene> scenes;
    scenes.reserve(args.count);
    for (int i = 0; i < args.count; ++i) {
        SceneParams params = cfg.data;
        params.rng_seed = cfg.data.rng_seed + static_cast<std::uint64_t>(i);
        scenes.push_back(generate_scene(params));
    }
    write_dataset(args.out, scenes);
    cfg.echo(fs::path(args.out) / "config.resolved.json");
}

void run_train(const TrainArgs& args) {
    const RunConfig cfg = RunConfig::load(args.config);
    const std::vector<Scene> scenes = load_dataset(args.data);
    std::vector<TrainSample> samples;
    samples.reserve(scenes.size());
    for (const Scene& s : scenes) {
        samples.push_back(to_train_sample(s));
    }
    const TrainResult result = train(samples, cfg.resolved_train_config());
    save_checkpoint(args.out, result.tokens);
    cfg.echo(args.out + ".config.json");

    const std::string log_path = args.log.empty() ? args.out + ".losses.csv" : args.log;
    std::ofstream log(log_path, std::ios::trunc);
    if (!log) {
        throw IoError("train: cannot write loss log " + log_path);
    }
    log << "epoch,l_con,l_neu,l_agg,l_geo,l_distill,total\n";
    char line[256];
    for (std::size_t e = 0; e < result.log.size(); ++e) {
        const EpochLog& l = result.log[e];
        std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", e, l.l_con,
                      l.l_neu, l.l_agg, l.l_geo, l.l_distill, l.total);
        log << line;
    }
}

void run_infer(const InferArgs& args) {
    const RunConfig cfg = load_config_or_defaults(args.config);
    const TokenBank tokens = load_checkpoint(args.ckpt);
    const RgbImage image = read_ppm(args.image);
    const TraversabilityOutput out =
        infer(tokens, image, cfg.alpha, cfg.uncertainty_epsilon);

    if (!args.score_out.empty()) {
        save_dmap(out.score.map(), args.score_out);
        write_pgm(fs::path(args.score_out).replace_extension(".pgm"), out.score);
    }
    if (!args.depth_out.empty()) {
        const FeatureMap features = extract_features(image);
        const DecodeResult decoded = decode(tokens, features);
        save_dmap(decoded.depth, args.depth_out);
    }
    if (!args.all_maps.empty()) {
        std::error_code ec;
        fs::create_directories(args.all_maps, ec);
        if (ec) {
            throw IoError("infer: cannot create " + args.all_maps);
        }
        const fs::path dir(args.all_maps);
        save_dmap(out.mean_p.map(), dir / "P.dmap");
        save_dmap(out.confidence.map(), dir / "C.dmap");
        save_dmap(out.variance, dir / "p_var.dmap");
        save_dmap(out.slope_risk.map(), dir / "R_slope.dmap");
        save_dmap(out.elevation_risk.map(), dir / "R_elev.dmap");
        save_dmap(out.score.map(), dir / "T.dmap");
        write_pgm(dir / "T.pgm", out.score);
    }
}

void run_eval(const EvalArgs& args) {
    const RunConfig cfg = load_config_or_defaults(args.config);
    const TokenBank tokens = load_checkpoint(args.ckpt);
    const std::vector<Scene> scenes = load_dataset(args.data);
    std::vector<EvalSample> samples;
    samples.reserve(scenes.size());
    for (const Scene& s : scenes) {
        samples.push_back(EvalSample{s.rgb, s.label});
    }

    EvalParams params;
    params.tau = args.tau_given ? args.tau : cfg.tau;
    params.alpha = cfg.alpha;
    params.epsilon = cfg.uncertainty_epsilon;
    params.aggregation = cfg.aggregation;
    params.corruption_seed = args.corrupt_seed;
    if (!args.corrupt.empty()) {
        const auto colon = args.corrupt.find(':');
        if (colon == std::string::npos) {
            throw ConfigError("eval: --corrupt expects kind:severity");
        }
        CorruptionSpec spec;
        spec.kind = corruption_kind_from_string(args.corrupt.substr(0, colon));
        try {
            spec.severity = std::stoi(args.corrupt.substr(colon + 1));
        } catch (const std::exception&) {
            throw ConfigError("eval: bad severity in --corrupt \"" + args.corrupt + "\"");
        }
        corruption_parameter(spec.kind, spec.severity);  // validates range
        params.corruption = spec;
    }

    const DatasetReport report = evaluate_dataset(tokens, samples, params);
    cfg.echo(args.report + ".config.json");
    const std::string text = report_to_text(report);
    std::cout << text;

    std::ofstream json_out(args.report, std::ios::trunc);
    if (!json_out) {
        throw IoError("eval: cannot write report " + args.report);
    }
    json_out << report_to_json(report);
    std::ofstream text_out(fs::path(args.report).replace_extension(".txt"), std::ios::trunc);
    if (!text_out) {
        throw IoError("eval: cannot write text report");
    }
    text_out << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"travkit: synthetic-terrain traversability estimation toolkit"};
    app.require_subcommand(1);

    GenDataArgs gen_args;
    CLI::App* gen = app.add_subcommand("gen-data", "Generate a synthetic scene dataset");
    gen->add_option("--config", gen_args.config, "Run config JSON")->required();
    gen->add_option("--out", gen_args.out, "Output dataset directory")->required();
    gen->add_option("--count", gen_args.count, "Number of scenes")->required();

    TrainArgs train_args;
    CLI::App* tr = app.add_subcommand("train", "Train a model on a dataset");
    tr->add_option("--config", train_args.config, "Run config JSON")->required();
    tr->add_option("--data", train_args.data, "Dataset directory")->required();
    tr->add_option("--out", train_args.out, "Checkpoint output path")->required();
    tr->add_option("--log", train_args.log, "Loss CSV path (default <out>.losses.csv)");

    InferArgs infer_args;
    CLI::App* inf = app.add_subcommand("infer", "Run inference on one PPM image");
    inf->add_option("--ckpt", infer_args.ckpt, "Checkpoint path")->required();
    inf->add_option("--image", infer_args.image, "Input PPM image")->required();
    inf->add_option("--config", infer_args.config, "Run config JSON (optional)");
    inf->add_option("--score-out", infer_args.score_out, "Write score map (.dmap, plus .pgm)");
    inf->add_option("--depth-out", infer_args.depth_out, "Write predicted depth map (.dmap)");
    inf->add_option("--all-maps", infer_args.all_maps,
                    "Directory for P, C, p_var, R_slope, R_elev, T maps");

    EvalArgs eval_args;
    CLI::App* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    ev->add_option("--ckpt", eval_args.ckpt, "Checkpoint path")->required();
    ev->add_option("--data", eval_args.data, "Dataset directory")->required();
    ev->add_option("--report", eval_args.report, "Report JSON output path")->required();
    CLI::Option* tau_opt = ev->add_option("--tau", eval_args.tau, "Score threshold");
    ev->add_option("--corrupt", eval_args.corrupt, "Corruption as kind:severity");
    ev->add_option("--corrupt-seed", eval_args.corrupt_seed, "Corruption seed");
    ev->add_option("--config", eval_args.config, "Run config JSON (optional)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    eval_args.tau_given = tau_opt->count() > 0;

    try {
        if (gen->parsed()) {
            run_gen_data(gen_args);
        } else if (tr->parsed()) {
            run_train(train_args);
        } else if (inf->parsed()) {
            run_infer(infer_args);
        } else if (ev->parsed()) {
            run_eval(eval_args);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
