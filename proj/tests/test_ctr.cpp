#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "descgen/ctr.hpp"
#include "descgen/rng.hpp"
#include "support/finite_diff.hpp"

using namespace descgen;
using namespace descgen::ctr;

namespace {

CtrModel plain_model() {
    // identity normalization so hand computations stay simple
    CtrModel m;
    return m;
}

std::vector<CtrExample> linearly_separable_fixture() {
    // 20 examples split cleanly by feature 0
    std::vector<CtrExample> ex;
    Rng rng(7);
    for (int i = 0; i < 20; ++i) {
        CtrExample e;
        const bool positive = i < 10;
        e.features[0] = positive ? 10.0 + rng.next_double() : -10.0 - rng.next_double();
        for (std::size_t j = 1; j < kFeatureCount; ++j)
            e.features[j] = rng.next_double() - 0.5;
        e.label = positive ? 1.0 : 0.0;
        ex.push_back(e);
    }
    return ex;
}

}  // namespace

TEST_CASE("feature extraction", "[ctr]") {
    auto rules = segmenter::AspectRuleSet::defaults();
    const auto& lex = rules.appeal_lexicon;

    SECTION("empty description gives the zero vector") {
        auto f = extract_features("", segmenter::segment("", rules), lex);
        for (double v : f) CHECK(v == 0.0);
    }
    SECTION("guarantee keyword sets the flag") {
        std::string text = "Only at Walmart.";
        auto f = extract_features(text, segmenter::segment(text, rules), lex);
        CHECK(f[9] == 1.0);
    }
    SECTION("coverage flags mirror the bundle") {
        std::string text =
            "Chic and elegant style. Material: cotton. Size: 10 inch. Unique design. "
            "Lifetime warranty.";
        auto bundle = segmenter::segment(text, rules);
        auto f = extract_features(text, bundle, lex);
        for (std::size_t i = 2; i <= 6; ++i) CHECK(f[i] == 1.0);
    }
    SECTION("token statistics") {
        std::string text = "soft soft 28 inch";
        auto f = extract_features(text, segmenter::segment(text, rules), lex);
        CHECK(f[0] == 4.0);              // token_count
        CHECK(f[1] == Catch::Approx((4 + 4 + 2 + 4) / 4.0));  // mean_word_length
        CHECK(f[7] == 2.0);              // appeal hits: soft twice
        CHECK(f[8] == 1.0);              // numeric tokens: 28
    }
}

TEST_CASE("prediction math", "[ctr]") {
    SECTION("zero model predicts one half") {
        CtrModel m = plain_model();
        FeatureVector x{};
        x[3] = 4.2;
        CHECK(predict_ctr(m, x) == Catch::Approx(0.5).margin(1e-15));
    }
    SECTION("large bias saturates") {
        CtrModel m = plain_model();
        m.bias = 20.0;
        CHECK(predict_ctr(m, FeatureVector{}) > 0.999);
        m.bias = -20.0;
        CHECK(predict_ctr(m, FeatureVector{}) < 0.001);
    }
    SECTION("matches a hand-computed sigmoid") {
        CtrModel m = plain_model();
        m.weights[0] = 0.75;
        m.weights[1] = -1.25;
        m.bias = 0.3;
        m.stats.mean[0] = 2.0;
        m.stats.stddev[0] = 4.0;
        m.stats.mean[1] = -1.0;
        m.stats.stddev[1] = 0.5;
        FeatureVector x{};
        x[0] = 6.0;   // z = 1.0
        x[1] = -0.5;  // z = 1.0
        const double t = 0.75 * 1.0 - 1.25 * 1.0 + 0.3;
        const double expected = 1.0 / (1.0 + std::exp(-t));
        CHECK(predict_ctr(m, x) == Catch::Approx(expected).margin(1e-12));
    }
    SECTION("prediction stays strictly inside (0,1)") {
        CtrModel m = plain_model();
        m.bias = 1000.0;
        CHECK(predict_ctr(m, FeatureVector{}) < 1.0);
        m.bias = -1000.0;
        CHECK(predict_ctr(m, FeatureVector{}) > 0.0);
    }
}

TEST_CASE("loss values", "[ctr]") {
    SECTION("y=1 at yhat=0.5 costs ln 2") {
        CtrModel m = plain_model();
        CtrExample e;
        e.label = 1.0;
        auto r = ctr_loss(m, {e});
        CHECK(r.loss == Catch::Approx(std::log(2.0)).epsilon(1e-12));
    }
    SECTION("perfect soft predictions cost the label entropy") {
        CtrModel m = plain_model();
        // with all-zero features and weights, yhat = sigmoid(bias)
        const double y = 0.3;
        m.bias = std::log(y / (1.0 - y));
        CtrExample e;
        e.label = y;
        auto r = ctr_loss(m, {e});
        const double entropy = -(y * std::log(y) + (1 - y) * std::log(1 - y));
        CHECK(r.loss == Catch::Approx(entropy).epsilon(1e-12));
    }
    SECTION("empty batch is an error") {
        CHECK_THROWS_AS(ctr_loss(plain_model(), {}), EmptyBatch);
    }
    SECTION("sum over the batch, not the mean") {
        CtrModel m = plain_model();
        CtrExample e;
        e.label = 1.0;
        auto one = ctr_loss(m, {e});
        auto two = ctr_loss(m, {e, e});
        CHECK(two.loss == Catch::Approx(2.0 * one.loss).epsilon(1e-12));
    }
}

TEST_CASE("loss gradient matches finite differences", "[ctr][grad]") {
    Rng rng(11);
    double worst = 0.0;
    for (int iter = 0; iter < 10; ++iter) {
        CtrModel m = plain_model();
        for (auto& w : m.weights) w = rng.next_gaussian();
        m.bias = rng.next_gaussian();
        std::vector<CtrExample> batch;
        for (int i = 0; i < 6; ++i) {
            CtrExample e;
            for (auto& f : e.features) f = rng.next_gaussian();
            e.label = rng.next_double();
            batch.push_back(e);
        }
        auto res = ctr_loss(m, batch);
        const double h = 1e-6;
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            double num = testsupport::central_diff(&m.weights[i], h,
                                                   [&] { return ctr_loss_value(m, batch); });
            worst = std::max(worst, testsupport::rel_err(res.grad.dw[i], num));
        }
        double num_b =
            testsupport::central_diff(&m.bias, h, [&] { return ctr_loss_value(m, batch); });
        worst = std::max(worst, testsupport::rel_err(res.grad.db, num_b));
    }
    INFO("worst relative error " << worst);
    CHECK(worst <= 1e-6);
}

TEST_CASE("training on a separable fixture reaches 0.99 accuracy", "[ctr]") {
    auto examples = linearly_separable_fixture();
    CtrTrainOptions opt;
    opt.epochs = 500;
    opt.learning_rate = 0.5;
    auto result = train_ctr(examples, opt);
    CHECK(train_accuracy(result.model, examples) >= 0.99);
    CHECK(result.warnings.empty());
}

TEST_CASE("training edge cases", "[ctr]") {
    SECTION("uniform 0.5 labels keep a zero model stationary") {
        std::vector<CtrExample> ex(4);
        Rng rng(3);
        for (auto& e : ex) {
            for (auto& f : e.features) f = rng.next_gaussian();
            e.label = 0.5;
        }
        CtrTrainOptions opt;
        opt.epochs = 50;
        auto result = train_ctr(ex, opt);
        for (double w : result.model.weights) CHECK(std::abs(w) < 1e-9);
        CHECK(std::abs(result.model.bias) < 1e-9);
    }
    SECTION("zero epochs returns the initialized model") {
        auto examples = linearly_separable_fixture();
        CtrTrainOptions opt;
        opt.epochs = 0;
        auto result = train_ctr(examples, opt);
        for (double w : result.model.weights) CHECK(w == 0.0);
        CHECK(result.model.bias == 0.0);
    }
    SECTION("one-sided labels warn") {
        std::vector<CtrExample> ex(3);
        for (auto& e : ex) e.label = 0.9;
        CtrTrainOptions opt;
        opt.epochs = 5;
        auto result = train_ctr(ex, opt);
        CHECK(result.warnings.size() == 1);
    }
    SECTION("an absurd learning rate is rescued by halving") {
        auto examples = linearly_separable_fixture();
        CtrTrainOptions opt;
        opt.epochs = 100;
        opt.learning_rate = 1e6;
        auto result = train_ctr(examples, opt);
        CHECK(result.halvings > 0);
        CHECK(std::isfinite(ctr_loss_value(result.model, examples)));
    }
    SECTION("binarization option") {
        std::vector<CtrExample> ex = linearly_separable_fixture();
        for (auto& e : ex) e.label = e.label == 1.0 ? 0.9 : 0.1;
        CtrTrainOptions opt;
        opt.epochs = 200;
        opt.binarize = true;
        auto result = train_ctr(ex, opt);
        CHECK(train_accuracy(result.model, ex) >= 0.99);
    }
}

TEST_CASE("normalization stats standardize the training features", "[ctr][property]") {
    Rng rng(21);
    std::vector<CtrExample> ex;
    for (int i = 0; i < 40; ++i) {
        CtrExample e;
        for (std::size_t j = 0; j < kFeatureCount; ++j)
            e.features[j] = 3.0 * rng.next_gaussian() + static_cast<double>(j);
        e.features[9] = 1.0;  // constant feature
        e.label = rng.next_double();
        ex.push_back(e);
    }
    auto stats = compute_stats(ex);
    CHECK(stats.zero_variance[9]);
    CHECK(stats.stddev[9] == 1.0);
    for (std::size_t j = 0; j < kFeatureCount - 1; ++j) {
        double mean = 0.0, var = 0.0;
        for (const auto& e : ex) mean += normalized(stats, e.features, j);
        mean /= static_cast<double>(ex.size());
        for (const auto& e : ex) {
            const double z = normalized(stats, e.features, j) - mean;
            var += z * z;
        }
        var /= static_cast<double>(ex.size());
        CHECK(std::abs(mean) <= 1e-9);
        CHECK(var == Catch::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("monotone response to positively weighted features", "[ctr]") {
    CtrModel m = plain_model();
    m.weights[0] = 2.0;
    m.weights[4] = 0.7;
    FeatureVector x{};
    for (std::size_t i : {0UL, 4UL}) {
        FeatureVector hi = x;
        hi[i] += 1.0;
        CHECK(predict_ctr(m, hi) > predict_ctr(m, x));
    }
}

TEST_CASE("ctr checkpoint round-trips bit-exactly", "[ctr]") {
    Rng rng(5);
    CtrModel m;
    for (auto& w : m.weights) w = rng.next_gaussian();
    m.bias = rng.next_gaussian();
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        m.stats.mean[i] = rng.next_gaussian();
        m.stats.stddev[i] = 0.5 + rng.next_double();
    }
    m.stats.zero_variance[3] = true;
    auto path = std::filesystem::temp_directory_path() / "descgen_ctr_test.txt";
    save_ctr(m, path);
    auto loaded = load_ctr(path);
    CHECK(loaded.weights == m.weights);
    CHECK(loaded.bias == m.bias);
    CHECK(loaded.stats.mean == m.stats.mean);
    CHECK(loaded.stats.stddev == m.stats.stddev);
    CHECK(loaded.stats.zero_variance == m.stats.zero_variance);
    std::filesystem::remove(path);
}
