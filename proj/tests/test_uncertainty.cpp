#include <doctest.h>

#include <cmath>

#include "support/oracles.hpp"
#include "trav/math_util.hpp"
#include "trav/pdt_losses.hpp"
#include "trav/rng.hpp"
#include "trav/uncertainty.hpp"

using namespace trav;

namespace {

HypothesisSet set_from_logits(double a, double b, double c, int h = 2, int w = 2) {
    return HypothesisSet({DenseMap(h, w, a), DenseMap(h, w, b), DenseMap(h, w, c)},
                         default_perspectives());
}

}  // namespace

TEST_CASE("mean and population variance of the sigmoided masks") {
    // identical tokens at logit 0: P = 0.5, variance = 0
    auto [mean0, var0] = mean_and_variance(set_from_logits(0.0, 0.0, 0.0));
    for (double v : mean0.map().values()) {
        CHECK(v == 0.5);
    }
    for (double v : var0.values()) {
        CHECK(v == 0.0);
    }

    // sigma-values (~1, ~1, ~0): P = 2/3 and population variance 2/9
    auto [mean1, var1] = mean_and_variance(set_from_logits(40.0, 40.0, -40.0));
    CHECK(mean1.at(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(var1.at(0, 0) == doctest::Approx(2.0 / 9.0).epsilon(1e-12));

    // sigma-values (~1, 0.5, ~0): P = 0.5 and variance 1/6
    auto [mean2, var2] = mean_and_variance(set_from_logits(40.0, 0.0, -40.0));
    CHECK(mean2.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(var2.at(0, 0) == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("variance is bounded by 2/9 and vanishes exactly on agreement") {
    Rng rng(21);
    for (int t = 0; t < 50; ++t) {
        auto [mean, var] = mean_and_variance(
            set_from_logits(rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0),
                            rng.uniform(-50.0, 50.0)));
        for (double v : var.values()) {
            CHECK(v >= 0.0);
            CHECK(v <= 2.0 / 9.0 + 1e-15);
        }
    }
    // strictly positive where any pair of sigmoided values differs
    auto [mean, var] = mean_and_variance(set_from_logits(0.5, 0.5, 0.6));
    for (double v : var.values()) {
        CHECK(v > 0.0);
    }
}

TEST_CASE("confidence from variance") {
    // all-zero variance -> C = 1 everywhere
    const UnitIntervalMap c0 = confidence_from_variance(DenseMap(3, 3, 0.0), 0.7, 1e-6);
    for (double v : c0.map().values()) {
        CHECK(v == 1.0);
    }

    // at the per-image max-variance pixel, C ~ 1 - alpha
    std::vector<double> vals{0.0, 0.05, 0.1, 1.0};
    const DenseMap var = DenseMap::from_values(2, 2, vals);
    const UnitIntervalMap c = confidence_from_variance(var, 0.7, 1e-6);
    CHECK(std::abs(c.at(1, 1) - 0.3) < 1e-6);
    CHECK(c.at(0, 0) == 1.0);

    // alpha = 0 disables suppression
    const UnitIntervalMap off = confidence_from_variance(var, 0.0, 1e-6);
    for (double v : off.map().values()) {
        CHECK(v == 1.0);
    }

    CHECK_THROWS_AS(confidence_from_variance(DenseMap(2, 2, -0.01), 0.7, 1e-6),
                    std::invalid_argument);
    CHECK_THROWS_AS(confidence_from_variance(var, 1.5, 1e-6), std::invalid_argument);
}

TEST_CASE("confidence is monotone non-increasing in variance") {
    Rng rng(33);
    const DenseMap var = testing::random_map(rng, 4, 4, 0.0, 0.22);
    const UnitIntervalMap c = confidence_from_variance(var, 0.7, 1e-6);
    for (int v = 0; v < 4; ++v) {
        for (int u = 0; u < 4; ++u) {
            CHECK(c.at(v, u) >= 1.0 - 0.7);  // C >= 1 - alpha everywhere
            for (int v2 = 0; v2 < 4; ++v2) {
                for (int u2 = 0; u2 < 4; ++u2) {
                    if (var.at(v, u) <= var.at(v2, u2)) {
                        CHECK(c.at(v, u) >= c.at(v2, u2));
                    }
                }
            }
        }
    }
}

TEST_CASE("per-image normalization is scale invariant up to epsilon") {
    Rng rng(55);
    const DenseMap var = testing::random_map(rng, 4, 4, 0.001, 0.2);
    const UnitIntervalMap c1 = confidence_from_variance(var, 0.7, 1e-6);
    std::vector<double> scaled(var.values().begin(), var.values().end());
    for (double& v : scaled) {
        v *= 7.5;
    }
    const UnitIntervalMap c2 =
        confidence_from_variance(DenseMap::from_values(4, 4, std::move(scaled)), 0.7, 1e-6);
    for (int v = 0; v < 4; ++v) {
        for (int u = 0; u < 4; ++u) {
            // epsilon perturbs the ratio by at most ~eps/max_var
            CHECK(std::abs(c1.at(v, u) - c2.at(v, u)) < 1e-4);
        }
    }
}

TEST_CASE("estimate_uncertainty composes mean, variance, and confidence") {
    const UncertaintyOutput out = estimate_uncertainty(set_from_logits(40.0, 40.0, -40.0), 0.7,
                                                       1e-6);
    CHECK(out.alpha == 0.7);
    CHECK(out.mean_p.at(0, 0) == doctest::Approx(2.0 / 3.0));
    // uniform variance map: every pixel is the per-image max
    CHECK(std::abs(out.confidence.at(0, 0) - 0.3) < 1e-5);
}
