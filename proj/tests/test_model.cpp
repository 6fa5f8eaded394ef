#include <optional>
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "support/oracles.hpp"
#include "trav/error.hpp"
#include "trav/eval.hpp"
#include "trav/model.hpp"
#include "trav/rng.hpp"
#include "trav/synthetic.hpp"

using namespace trav;
using trav::testing::rel_error;
namespace fs = std::filesystem;

namespace {

RgbImage random_image(Rng& rng, int h, int w) {
    auto channel = [&] {
        std::vector<double> vals(static_cast<std::size_t>(h) * w);
        for (double& v : vals) {
            v = static_cast<double>(rng.uniform_int(256)) / 255.0;
        }
        return DenseMap::from_values(h, w, std::move(vals));
    };
    return RgbImage{channel(), channel(), channel()};
}

// random but plane-fittable training sample
TrainSample random_sample(Rng& rng, int h, int w) {
    RgbImage rgb = random_image(rng, h, w);
    DenseMap depth = testing::random_map(rng, h, w, 2.0, 6.0);
    UnitIntervalMap label = testing::random_binary_map(rng, h, w, 0.6);
    return TrainSample{std::move(rgb), std::move(depth), std::move(label)};
}

void zero_head_output_weights(TokenBank& bank) {
    auto p = bank.parameters();
    const ModelDims& d = bank.dims();
    for (int head = 0; head < kNumHeads; ++head) {
        std::size_t off = bank.mlp_offset(head) +
                          static_cast<std::size_t>(d.hidden) * d.d_tok + d.hidden;
        for (int i = 0; i < d.f_dim * d.hidden + d.f_dim; ++i) {
            p[off + i] = 0.0;
        }
    }
}

}  // namespace

TEST_CASE("decode with zero output weights gives zero logits and 0.5 risks") {
    Rng rng(3);
    const FeatureMap features = extract_features(random_image(rng, 9, 9));
    TokenBank bank = TokenBank::init(ModelDims{}, 7);
    zero_head_output_weights(bank);
    const DecodeResult out = decode(bank, features);
    for (int k = 0; k < 3; ++k) {
        for (double v : out.semantic_logits[k].values()) {
            CHECK(v == 0.0);
        }
    }
    for (int c = 0; c < 2; ++c) {
        for (double v : out.risks[c].map().values()) {
            CHECK(v == 0.5);
        }
    }
}

TEST_CASE("doubling one semantic head's output weights doubles only its map") {
    Rng rng(5);
    const FeatureMap features = extract_features(random_image(rng, 8, 8));
    const TokenBank bank = TokenBank::init(ModelDims{}, 11);
    const DecodeResult base = decode(bank, features);

    TokenBank doubled = bank;
    {
        auto p = doubled.parameters();
        const ModelDims& d = doubled.dims();
        const std::size_t off = doubled.mlp_offset(1) +
                                static_cast<std::size_t>(d.hidden) * d.d_tok + d.hidden;
        for (int i = 0; i < d.f_dim * d.hidden + d.f_dim; ++i) {
            p[off + i] *= 2.0;
        }
    }
    const DecodeResult out = decode(doubled, features);
    for (std::size_t i = 0; i < base.semantic_logits[1].size(); ++i) {
        CHECK(out.semantic_logits[1].values()[i] ==
              doctest::Approx(2.0 * base.semantic_logits[1].values()[i]).epsilon(1e-12));
        CHECK(out.semantic_logits[0].values()[i] == base.semantic_logits[0].values()[i]);
        CHECK(out.semantic_logits[2].values()[i] == base.semantic_logits[2].values()[i]);
        CHECK(out.risk_logits[0].values()[i] == base.risk_logits[0].values()[i]);
    }
}

TEST_CASE("full-model gradient matches finite differences on every parameter") {
    Rng rng(1001);
    ModelDims dims;
    dims.n_prompt = 2;
    dims.d_tok = 6;
    dims.hidden = 6;
    LossParams params;

    int instances = 0;
    while (instances < 3) {
        const TrainSample sample = random_sample(rng, 8, 8);
        std::optional<PreparedSample> prepared;
        try {
            prepared.emplace(prepare_sample(sample, 3.0, 0.0, 0));
        } catch (const PlaneFitError&) {
            continue;  // mask happened to be degenerate; draw another
        }
        TokenBank bank = TokenBank::init(dims, 100 + instances);

        std::vector<double> grad(bank.parameter_count(), 0.0);
        const LossBreakdown base = model_loss(bank, *prepared, params, &grad, 1.0);
        CHECK(std::isfinite(base.total));

        auto p = bank.parameters();
        int bad = 0;
        for (std::size_t i = 0; i < bank.parameter_count(); ++i) {
            const double fd = testing::central_diff(
                [&] { return model_loss(bank, *prepared, params, nullptr, 1.0).total; }, &p[i]);
            if (rel_error(grad[i], fd) >= 1e-4) {
                ++bad;
            }
        }
        CHECK(bad == 0);
        ++instances;
    }
}

TEST_CASE("semantic token parameters receive gradient only from their own loss") {
    Rng rng(2002);
    ModelDims dims;
    dims.n_prompt = 2;
    dims.d_tok = 6;
    dims.hidden = 6;
    const TrainSample sample = random_sample(rng, 8, 8);
    const PreparedSample prepared = prepare_sample(sample, 3.0, 0.0, 0);
    const TokenBank bank = TokenBank::init(dims, 17);

    // token k's per-token loss must not change when token j's parameters move
    for (int j = 0; j < 3; ++j) {
        TokenBank perturbed = bank;
        auto p = perturbed.parameters();
        p[perturbed.token_offset(j)] += 0.05;
        p[perturbed.mlp_offset(j) + 3] += 0.05;
        const LossBreakdown a = model_loss(bank, prepared, LossParams{}, nullptr, 1.0);
        const LossBreakdown b = model_loss(perturbed, prepared, LossParams{}, nullptr, 1.0);
        for (int k = 0; k < 3; ++k) {
            if (k != j) {
                CHECK(a.per_token[k] == b.per_token[k]);
            }
        }
        CHECK(a.per_token[j] != b.per_token[j]);
    }
}

TEST_CASE("checkpoint round-trip is exact") {
    const TokenBank bank = TokenBank::init(ModelDims{}, 99);
    const fs::path path = fs::temp_directory_path() / "travkit_test_ckpt.vtkb";
    save_checkpoint(path, bank);
    const TokenBank loaded = load_checkpoint(path);
    CHECK(loaded.dims() == bank.dims());
    REQUIRE(loaded.parameter_count() == bank.parameter_count());
    for (std::size_t i = 0; i < bank.parameter_count(); ++i) {
        CHECK(loaded.parameters()[i] == bank.parameters()[i]);
    }

    SUBCASE("bad magic") {
        std::ofstream(path, std::ios::binary) << "NOPE";
        CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    }
    SUBCASE("truncated payload") {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), {});
        in.close();
        std::ofstream(path, std::ios::binary) << bytes.substr(0, bytes.size() / 2);
        CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    }
    fs::remove(path);
}

TEST_CASE("training is bit-reproducible per seed") {
    std::vector<TrainSample> dataset;
    for (int i = 0; i < 6; ++i) {
        dataset.push_back(to_train_sample(
            generate_scene(SceneParams::defaults_for(Preset::easy, 24, 24, 50 + i))));
    }
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 3;
    cfg.rng_seed = 42;
    cfg.dims.d_tok = 8;
    cfg.dims.hidden = 8;

    const TrainResult a = train(dataset, cfg);
    const TrainResult b = train(dataset, cfg);
    REQUIRE(a.tokens.parameter_count() == b.tokens.parameter_count());
    for (std::size_t i = 0; i < a.tokens.parameter_count(); ++i) {
        CHECK(a.tokens.parameters()[i] == b.tokens.parameters()[i]);
    }
    REQUIRE(a.log.size() == 2);
    CHECK(a.log[0].total == b.log[0].total);

    cfg.rng_seed = 43;
    const TrainResult c = train(dataset, cfg);
    bool any_different = false;
    for (std::size_t i = 0; i < a.tokens.parameter_count(); ++i) {
        any_different |= a.tokens.parameters()[i] != c.tokens.parameters()[i];
    }
    CHECK(any_different);
}

TEST_CASE("epoch log total follows the combined objective") {
    std::vector<TrainSample> dataset;
    for (int i = 0; i < 4; ++i) {
        dataset.push_back(to_train_sample(
            generate_scene(SceneParams::defaults_for(Preset::mixed, 24, 24, 80 + i))));
    }
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 2;
    cfg.dims.d_tok = 8;
    cfg.dims.hidden = 8;
    const TrainResult r = train(dataset, cfg);
    REQUIRE(r.log.size() == 3);
    for (const EpochLog& l : r.log) {
        const double expected = l.l_con + l.l_neu + l.l_agg +
                                cfg.loss.geo_weights.lambda_geo * (l.l_geo + l.l_distill);
        CHECK(std::abs(l.total - expected) < 1e-9);
    }
}

TEST_CASE("training on one separable scene cuts the loss by 90 percent") {
    const Scene scene = generate_scene(SceneParams::defaults_for(Preset::easy, 32, 32, 4));
    std::vector<TrainSample> dataset{to_train_sample(scene)};
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.batch_size = 1;  // one scene, so one optimizer step per epoch
    cfg.lr_tokens = 0.2;
    cfg.lr_depth_head = 0.2;
    cfg.weight_decay = 0.0;
    cfg.beta1 = 0.4;  // few-step regime wants light momentum
    cfg.beta2 = 0.9;
    cfg.rng_seed = 4;
    const TrainResult r = train(dataset, cfg);
    REQUIRE(r.log.size() == 10);

    // loss after the full 10 epochs vs the first logged (pre-update) loss
    const PreparedSample prep = prepare_sample(dataset[0], cfg.geometry_beta, 0.0, 0);
    const LossBreakdown after = model_loss(r.tokens, prep, cfg.loss, nullptr, 1.0);
    CHECK(after.total < 0.1 * r.log.front().total);
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
    std::vector<TrainSample> dataset{to_train_sample(
        generate_scene(SceneParams::defaults_for(Preset::easy, 24, 24, 3)))};
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 1;
    cfg.lr_tokens = 1e300;  // drives the logits to +/-inf within a few steps
    cfg.lr_depth_head = 1e300;
    CHECK_THROWS_WITH_AS(train(dataset, cfg), doctest::Contains("epoch"), NumericError);
    CHECK_THROWS_WITH_AS(train(dataset, cfg), doctest::Contains("non-finite"), NumericError);
}

TEST_CASE("train rejects an empty dataset") {
    CHECK_THROWS_AS(train({}, TrainConfig{}), std::invalid_argument);
}

TEST_CASE("easy-preset training generalizes to a held-out scene") {
    std::vector<TrainSample> dataset;
    for (int i = 0; i < 24; ++i) {
        dataset.push_back(to_train_sample(
            generate_scene(SceneParams::defaults_for(Preset::easy, 32, 32, 300 + i))));
    }
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.batch_size = 8;
    cfg.lr_tokens = 0.02;
    cfg.lr_depth_head = 0.02;
    cfg.rng_seed = 2;
    const TrainResult r = train(dataset, cfg);

    const Scene held_out = generate_scene(SceneParams::defaults_for(Preset::easy, 32, 32, 999));
    const TraversabilityOutput out = infer(r.tokens, held_out.rgb, 0.7, 1e-6);
    const MetricReport m = binary_metrics(out.score, held_out.label, 0.5);
    CHECK(m.iou > 0.7);
}

TEST_CASE("teacher noise is optional, seeded, and multiplicative") {
    const Scene scene = generate_scene(SceneParams::defaults_for(Preset::easy, 24, 24, 12));
    const TrainSample sample = to_train_sample(scene);
    const PreparedSample clean = prepare_sample(sample, 3.0, 0.0, 77);
    const PreparedSample noisy1 = prepare_sample(sample, 3.0, 0.1, 77);
    const PreparedSample noisy2 = prepare_sample(sample, 3.0, 0.1, 77);
    const PreparedSample noisy3 = prepare_sample(sample, 3.0, 0.1, 78);
    bool any_diff = false;
    for (std::size_t i = 0; i < clean.teacher_depth.size(); ++i) {
        CHECK(clean.teacher_depth.values()[i] == sample.depth.values()[i]);
        CHECK(noisy1.teacher_depth.values()[i] == noisy2.teacher_depth.values()[i]);
        CHECK(noisy1.teacher_depth.values()[i] > 0.0);  // log-normal keeps depth positive
        any_diff |= noisy1.teacher_depth.values()[i] != noisy3.teacher_depth.values()[i];
    }
    CHECK(any_diff);
}

TEST_CASE("infer output satisfies the fusion identity and is deterministic") {
    const Scene scene = generate_scene(SceneParams::defaults_for(Preset::mixed, 24, 24, 9));
    std::vector<TrainSample> dataset{to_train_sample(scene)};
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 1;
    cfg.dims.d_tok = 8;
    cfg.dims.hidden = 8;
    const TrainResult r = train(dataset, cfg);

    const TraversabilityOutput a = infer(r.tokens, scene.rgb, 0.7, 1e-6);
    const TraversabilityOutput b = infer(r.tokens, scene.rgb, 0.7, 1e-6);
    for (int v = 0; v < 24; ++v) {
        for (int u = 0; u < 24; ++u) {
            const double expected =
                a.confidence.at(v, u) * a.mean_p.at(v, u) *
                (1.0 - (a.slope_risk.at(v, u) + a.elevation_risk.at(v, u)) / 2.0);
            CHECK(std::abs(a.score.at(v, u) - expected) < 1e-12);
            CHECK(a.score.at(v, u) == b.score.at(v, u));
        }
    }
}
