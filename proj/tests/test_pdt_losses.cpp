#include <doctest.h>

#include <array>
#include <cmath>

#include "support/oracles.hpp"
#include "trav/dense_map.hpp"
#include "trav/math_util.hpp"
#include "trav/pdt_losses.hpp"
#include "trav/rng.hpp"

using namespace trav;
using trav::testing::rel_error;

namespace {

UnitIntervalMap binary_map(int h, int w, double value) {
    return UnitIntervalMap(DenseMap(h, w, value));
}

// finite-difference check of a loss gradient over every pixel
template <class LossFn>
void check_gradient(DenseMap logits, const UnitIntervalMap& labels, LossFn&& loss_fn,
                    double tol = 1e-4) {
    const auto result = loss_fn(logits, labels);
    for (int v = 0; v < logits.height(); ++v) {
        for (int u = 0; u < logits.width(); ++u) {
            const double fd = testing::central_diff(
                [&] { return loss_fn(logits, labels).value; }, &logits.at(v, u));
            const double analytic = result.grad.at(v, u);
            CHECK(rel_error(analytic, fd) < tol);
        }
    }
}

}  // namespace

TEST_CASE("focal loss trivial cases") {
    // confident correct prediction
    const LossResult confident = focal_loss(DenseMap(3, 3, 20.0), binary_map(3, 3, 1.0), 2.0);
    CHECK(confident.value >= 0.0);
    CHECK(confident.value < 1e-6);

    // gamma = 0 reduces to mean BCE: sigmoid(0) = 0.5 -> ln 2 per pixel
    const LossResult bce = focal_loss(DenseMap(4, 4, 0.0), binary_map(4, 4, 1.0), 0.0);
    CHECK(bce.value == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // frozen single-pixel value: -(1-sigmoid(0.7))^0.5 * ln sigmoid(0.7)
    const LossResult single = focal_loss(DenseMap(1, 1, 0.7), binary_map(1, 1, 1.0), 0.5);
    CHECK(single.value == doctest::Approx(0.23224784311432817).epsilon(1e-12));

    CHECK_THROWS_AS(focal_loss(DenseMap(2, 2, 0.0), UnitIntervalMap(DenseMap(2, 2, 0.5)), 1.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(focal_loss(DenseMap(2, 3, 0.0), binary_map(2, 2, 1.0), 1.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(focal_loss(DenseMap(2, 2, 0.0), binary_map(2, 2, 1.0), -0.5),
                    std::invalid_argument);
}

TEST_CASE("focal loss is stable at extreme logits") {
    for (double logit : {-700.0, -40.0, 40.0, 700.0}) {
        for (double label : {0.0, 1.0}) {
            const LossResult r =
                focal_loss(DenseMap(2, 2, logit), binary_map(2, 2, label), 0.5);
            CHECK(std::isfinite(r.value));
            CHECK(r.value >= 0.0);
            for (double g : r.grad.values()) {
                CHECK(std::isfinite(g));
            }
        }
    }
}

TEST_CASE("sum reduction scales mean by pixel count") {
    Rng rng(3);
    DenseMap logits = testing::random_map(rng, 3, 5, -2.0, 2.0);
    const UnitIntervalMap labels = testing::random_binary_map(rng, 3, 5);
    const LossResult mean = focal_loss(logits, labels, 0.7, LossReduction::mean);
    const LossResult sum = focal_loss(logits, labels, 0.7, LossReduction::sum);
    CHECK(sum.value == doctest::Approx(mean.value * 15.0).epsilon(1e-12));

    // sum-reduced gradients also track finite differences
    for (int v = 0; v < 3; ++v) {
        for (int u = 0; u < 5; ++u) {
            const double fd = testing::central_diff(
                [&] { return focal_loss(logits, labels, 0.7, LossReduction::sum).value; },
                &logits.at(v, u));
            CHECK(rel_error(sum.grad.at(v, u), fd) < 1e-4);
        }
    }
}

TEST_CASE("tversky loss against hand-computed counts") {
    // 70 positive pixels at p = 5/7 (TP = 50, FN = 20) and 40 negative pixels
    // at p = 0.25 (FP = 10); Tversky with (3.0, 0.3) then equals
    // 1 - 50.000001/86.000001
    std::vector<double> logits(110);
    std::vector<double> labels(110);
    for (int i = 0; i < 70; ++i) {
        logits[i] = std::log(2.5);
        labels[i] = 1.0;
    }
    for (int i = 70; i < 110; ++i) {
        logits[i] = std::log(1.0 / 3.0);
        labels[i] = 0.0;
    }
    const DenseMap logit_map = DenseMap::from_values(10, 11, logits);
    const UnitIntervalMap label_map(DenseMap::from_values(10, 11, labels));
    const PerspectiveConfig cfg{0.5, 3.0, 0.3, 1e-6};
    const LossResult r = tversky_loss(logit_map, label_map, cfg);
    CHECK(r.value == doctest::Approx(0.4186046462952948).epsilon(1e-9));
    CHECK(std::abs(r.value - 0.41860) < 1e-4);
}

TEST_CASE("tversky trivial cases") {
    // all-correct hard prediction
    std::vector<double> logits(16);
    std::vector<double> labels(16);
    for (int i = 0; i < 16; ++i) {
        labels[i] = i < 8 ? 1.0 : 0.0;
        logits[i] = i < 8 ? 40.0 : -40.0;
    }
    const LossResult perfect =
        tversky_loss(DenseMap::from_values(4, 4, logits),
                     UnitIntervalMap(DenseMap::from_values(4, 4, labels)), PerspectiveConfig{});
    CHECK(perfect.value >= 0.0);
    CHECK(perfect.value < 1e-9);

    // empty positive label map with p -> 0: epsilon guards 1 - eps/eps = 0
    const LossResult empty =
        tversky_loss(DenseMap(4, 4, -40.0), binary_map(4, 4, 0.0), PerspectiveConfig{});
    CHECK(std::abs(empty.value) < 1e-9);

    // loss stays in [0, 1)
    Rng rng(5);
    for (int t = 0; t < 20; ++t) {
        const DenseMap l = testing::random_map(rng, 4, 4, -4.0, 4.0);
        const UnitIntervalMap y = testing::random_binary_map(rng, 4, 4);
        const double val = tversky_loss(l, y, PerspectiveConfig{1.0, 2.0, 0.5, 1e-6}).value;
        CHECK(val >= 0.0);
        CHECK(val < 1.0);
    }
}

TEST_CASE("tversky monotone asymmetry") {
    // one false-positive pixel: raising alpha_fp must strictly raise the loss
    std::vector<double> logits{2.0, 3.0, -3.0, 1.5};
    std::vector<double> labels{1.0, 1.0, 0.0, 0.0};  // last pixel is a soft FP
    const DenseMap l = DenseMap::from_values(2, 2, logits);
    const UnitIntervalMap y(DenseMap::from_values(2, 2, labels));
    double prev = -1.0;
    for (double alpha_fp : {0.5, 1.0, 2.0, 4.0}) {
        const double val = tversky_loss(l, y, PerspectiveConfig{0.5, alpha_fp, 1.0, 1e-6}).value;
        CHECK(val > prev);
        prev = val;
    }
    // symmetric case: a false-negative pixel and alpha_fn
    std::vector<double> logits_fn{2.0, -1.5, -3.0, -4.0};
    const DenseMap lfn = DenseMap::from_values(2, 2, logits_fn);
    prev = -1.0;
    for (double alpha_fn : {0.5, 1.0, 2.0, 4.0}) {
        const double val = tversky_loss(lfn, y, PerspectiveConfig{0.5, 1.0, alpha_fn, 1e-6}).value;
        CHECK(val > prev);
        prev = val;
    }
}

TEST_CASE("tversky with unit weights is the soft dice-style loss") {
    Rng rng(9);
    for (int t = 0; t < 10; ++t) {
        const DenseMap l = testing::random_map(rng, 4, 4, -3.0, 3.0);
        const UnitIntervalMap y = testing::random_binary_map(rng, 4, 4);
        double tp = 0.0, fp = 0.0, fn = 0.0;
        for (int v = 0; v < 4; ++v) {
            for (int u = 0; u < 4; ++u) {
                const double p = sigmoid(l.at(v, u));
                tp += p * y.at(v, u);
                fp += p * (1.0 - y.at(v, u));
                fn += (1.0 - p) * y.at(v, u);
            }
        }
        const double dice_style = 1.0 - tp / (tp + fp + fn);
        const double val = tversky_loss(l, y, PerspectiveConfig{0.5, 1.0, 1.0, 1e-9}).value;
        CHECK(std::abs(val - dice_style) < 1e-6);
    }
}

TEST_CASE("gradients match central finite differences") {
    Rng rng(1234);
    int instances = 0;
    while (instances < 100) {
        const int h = 2 + static_cast<int>(rng.uniform_int(3));
        const int w = 2 + static_cast<int>(rng.uniform_int(3));
        const DenseMap logits = testing::random_map(rng, h, w, -3.0, 3.0);
        const UnitIntervalMap labels = testing::random_binary_map(rng, h, w);
        const double gamma = rng.uniform(0.0, 2.0);
        const PerspectiveConfig cfg{gamma, rng.uniform(0.3, 3.0), rng.uniform(0.3, 3.0), 1e-6};

        check_gradient(logits, labels, [&](const DenseMap& l, const UnitIntervalMap& y) {
            return focal_loss(l, y, gamma);
        });
        check_gradient(logits, labels, [&](const DenseMap& l, const UnitIntervalMap& y) {
            return tversky_loss(l, y, cfg);
        });
        ++instances;
    }
}

TEST_CASE("pdt loss composes the per-token losses") {
    Rng rng(42);
    const UnitIntervalMap labels = testing::random_binary_map(rng, 4, 4);
    std::array<DenseMap, 3> logits{testing::random_map(rng, 4, 4, -2.0, 2.0),
                                   testing::random_map(rng, 4, 4, -2.0, 2.0),
                                   testing::random_map(rng, 4, 4, -2.0, 2.0)};
    const auto configs = default_perspectives();
    const HypothesisSet set(logits, configs);
    const PdtLossResult r = pdt_loss(set, labels);

    double expected_total = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double fk = focal_loss(logits[k], labels, configs[k].gamma).value;
        const double tk = tversky_loss(logits[k], labels, configs[k]).value;
        CHECK(r.per_token[k] == doctest::Approx(fk + tk).epsilon(1e-12));
        expected_total += fk + tk;
    }
    CHECK(r.total == doctest::Approx(expected_total).epsilon(1e-12));

    // three identical perfect predictions -> total ~ 0
    std::vector<double> sep(16);
    std::vector<double> y(16);
    for (int i = 0; i < 16; ++i) {
        y[i] = i % 2 == 0 ? 1.0 : 0.0;
        sep[i] = y[i] == 1.0 ? 40.0 : -40.0;
    }
    const DenseMap perfect = DenseMap::from_values(4, 4, sep);
    const HypothesisSet perfect_set({perfect, perfect, perfect}, configs);
    CHECK(pdt_loss(perfect_set, UnitIntervalMap(DenseMap::from_values(4, 4, y))).total < 1e-6);
}

TEST_CASE("pdt per-token gradients are isolated") {
    Rng rng(77);
    const UnitIntervalMap labels = testing::random_binary_map(rng, 3, 3);
    std::array<DenseMap, 3> logits{testing::random_map(rng, 3, 3, -2.0, 2.0),
                                   testing::random_map(rng, 3, 3, -2.0, 2.0),
                                   testing::random_map(rng, 3, 3, -2.0, 2.0)};
    const auto configs = default_perspectives();
    const PdtLossResult base = pdt_loss(HypothesisSet(logits, configs), labels);

    // perturbing token j's logits leaves token k's loss unchanged for k != j
    for (int j = 0; j < 3; ++j) {
        auto perturbed = logits;
        perturbed[j].at(1, 1) += 0.25;
        const PdtLossResult r = pdt_loss(HypothesisSet(perturbed, configs), labels);
        for (int k = 0; k < 3; ++k) {
            if (k != j) {
                CHECK(r.per_token[k] == base.per_token[k]);
            }
        }
    }
}

TEST_CASE("pdt is permutation-covariant in (token, config) pairs") {
    Rng rng(99);
    const UnitIntervalMap labels = testing::random_binary_map(rng, 4, 4);
    std::array<DenseMap, 3> logits{testing::random_map(rng, 4, 4, -2.0, 2.0),
                                   testing::random_map(rng, 4, 4, -2.0, 2.0),
                                   testing::random_map(rng, 4, 4, -2.0, 2.0)};
    auto configs = default_perspectives();
    const PdtLossResult base = pdt_loss(HypothesisSet(logits, configs), labels);

    const std::array<int, 3> perm{2, 0, 1};
    std::array<DenseMap, 3> plogits{logits[perm[0]], logits[perm[1]], logits[perm[2]]};
    std::array<PerspectiveConfig, 3> pconfigs{configs[perm[0]], configs[perm[1]],
                                              configs[perm[2]]};
    const PdtLossResult permuted = pdt_loss(HypothesisSet(plogits, pconfigs), labels);
    CHECK(permuted.total == doctest::Approx(base.total).epsilon(1e-12));
    for (int k = 0; k < 3; ++k) {
        CHECK(permuted.per_token[k] == doctest::Approx(base.per_token[perm[k]]).epsilon(1e-12));
    }
}
