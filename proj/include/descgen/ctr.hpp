#pragma once
// Description feature extraction and a logistic-regression click-through-rate
// model: prediction is sigmoid(w . z + b) on z-scored features, the loss is
// summed binary cross-entropy with soft labels, and training is full-batch
// gradient descent with an L2 penalty and backtracking on the learning rate.

#include <array>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "descgen/common.hpp"
#include "descgen/segmenter.hpp"
#include "descgen/textmodel.hpp"

namespace descgen::ctr {

inline constexpr std::size_t kFeatureCount = 10;

// Fixed public feature order; checkpoints depend on it.
inline constexpr std::array<const char*, kFeatureCount> kFeatureNames = {
    "token_count",
    "mean_word_length",
    "aspect_language_appeal",
    "aspect_factual_information",
    "aspect_product_dimensions",
    "aspect_unique_attributes",
    "aspect_brand_guarantees",
    "appeal_lexicon_hits",
    "numeric_token_count",
    "guarantee_keyword_flag",
};

using FeatureVector = std::array<double, kFeatureCount>;

struct CtrExample {
    FeatureVector features{};
    double label = 0.0;  // empirical CTR in [0,1]
};

struct NormStats {
    std::array<double, kFeatureCount> mean{};
    std::array<double, kFeatureCount> stddev{};
    std::array<bool, kFeatureCount> zero_variance{};

    NormStats() { stddev.fill(1.0); }
};

struct CtrModel {
    std::array<double, kFeatureCount> weights{};
    double bias = 0.0;
    NormStats stats;
};

struct EmptyBatch : TrainingError {
    EmptyBatch() : TrainingError("ctr loss requires a non-empty batch") {}
};
struct Diverged : TrainingError {
    explicit Diverged(const std::string& why) : TrainingError("ctr training diverged: " + why) {}
};

inline const std::array<const char*, 3>& guarantee_keywords() {
    static const std::array<const char*, 3> kw = {"warranty", "guarantee", "only at"};
    return kw;
}

inline FeatureVector extract_features(const std::string& description,
                                      const segmenter::AspectBundle& bundle,
                                      const std::set<std::string>& appeal_lexicon) {
    FeatureVector f{};
    const auto tokens = textmodel::tokenize(description);
    f[0] = static_cast<double>(tokens.size());
    if (!tokens.empty()) {
        double total = 0.0;
        for (const auto& t : tokens) total += static_cast<double>(t.size());
        f[1] = total / static_cast<double>(tokens.size());
    }
    const auto cov = segmenter::coverage_vector(bundle);
    for (std::size_t i = 0; i < segmenter::kAspectCount; ++i) f[2 + i] = cov[i];
    f[7] = static_cast<double>(segmenter::appeal_hits(description, appeal_lexicon));
    std::size_t numeric = 0;
    for (const auto& t : tokens) {
        bool all_digits = !t.empty();
        for (char c : t)
            if (!std::isdigit(static_cast<unsigned char>(c))) all_digits = false;
        if (all_digits) ++numeric;
    }
    f[8] = static_cast<double>(numeric);
    for (const char* kw : guarantee_keywords())
        if (contains_ci(description, kw)) {
            f[9] = 1.0;
            break;
        }
    return f;
}

inline NormStats compute_stats(const std::vector<CtrExample>& examples) {
    NormStats s;
    if (examples.empty()) return s;
    const double n = static_cast<double>(examples.size());
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        double mean = 0.0;
        for (const auto& ex : examples) mean += ex.features[i];
        mean /= n;
        double var = 0.0;
        for (const auto& ex : examples) {
            const double c = ex.features[i] - mean;
            var += c * c;
        }
        var /= n;
        s.mean[i] = mean;
        if (var > 0.0) {
            s.stddev[i] = std::sqrt(var);
            s.zero_variance[i] = false;
        } else {
            s.stddev[i] = 1.0;  // constant feature: pass through centered
            s.zero_variance[i] = true;
        }
    }
    return s;
}

inline double normalized(const NormStats& stats, const FeatureVector& x, std::size_t i) {
    return (x[i] - stats.mean[i]) / stats.stddev[i];
}

inline double decision_logit(const CtrModel& model, const FeatureVector& x) {
    double t = model.bias;
    for (std::size_t i = 0; i < kFeatureCount; ++i)
        t += model.weights[i] * normalized(model.stats, x, i);
    return t;
}

inline double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

// Predicted CTR, clamped away from exact 0/1 so downstream logs stay finite.
inline double predict_ctr(const CtrModel& model, const FeatureVector& x) {
    const double eps = 1e-15;
    return std::min(1.0 - eps, std::max(eps, sigmoid(decision_logit(model, x))));
}

struct CtrGrad {
    std::array<double, kFeatureCount> dw{};
    double db = 0.0;
};

struct CtrLossResult {
    double loss = 0.0;
    CtrGrad grad;
};

// softplus(t) = log(1 + e^t), evaluated without overflow
inline double softplus(double t) {
    return std::log1p(std::exp(-std::abs(t))) + std::max(t, 0.0);
}

// Summed BCE over the batch: -sum_d [y log yhat + (1-y) log(1-yhat)],
// computed in logit form as sum_d [softplus(t_d) - y_d t_d]. The gradient in
// t is exactly sigmoid(t) - y.
inline CtrLossResult ctr_loss(const CtrModel& model, const std::vector<CtrExample>& batch) {
    if (batch.empty()) throw EmptyBatch();
    CtrLossResult r;
    for (const auto& ex : batch) {
        const double t = decision_logit(model, ex.features);
        r.loss += softplus(t) - ex.label * t;
        const double gt = sigmoid(t) - ex.label;
        for (std::size_t i = 0; i < kFeatureCount; ++i)
            r.grad.dw[i] += gt * normalized(model.stats, ex.features, i);
        r.grad.db += gt;
    }
    return r;
}

inline double ctr_loss_value(const CtrModel& model, const std::vector<CtrExample>& batch) {
    if (batch.empty()) throw EmptyBatch();
    double loss = 0.0;
    for (const auto& ex : batch) {
        const double t = decision_logit(model, ex.features);
        loss += softplus(t) - ex.label * t;
    }
    return loss;
}

struct CtrTrainOptions {
    std::size_t epochs = 200;
    double learning_rate = 0.5;
    double l2 = 1e-4;  // penalty l2 * ||w||^2, separate from the blend weight
    std::uint64_t seed = 0;
    bool binarize = false;
    double binarize_threshold = 0.5;
};

struct CtrTrainResult {
    CtrModel model;
    std::vector<double> loss_trace;  // objective (BCE + L2) per epoch, pre-step
    std::size_t halvings = 0;
    std::vector<std::string> warnings;
};

inline CtrTrainResult train_ctr(const std::vector<CtrExample>& examples,
                                const CtrTrainOptions& options) {
    if (examples.size() < 2) throw TrainingError("ctr training requires at least 2 examples");

    std::vector<CtrExample> data = examples;
    if (options.binarize)
        for (auto& ex : data) ex.label = ex.label >= options.binarize_threshold ? 1.0 : 0.0;

    CtrTrainResult out;
    out.model.stats = compute_stats(data);

    bool low = false, high = false;
    for (const auto& ex : data) (ex.label < 0.5 ? low : high) = true;
    if (!low || !high)
        out.warnings.push_back("all labels fall on one side of 0.5; the fit may be degenerate");

    auto objective = [&](const CtrModel& m) {
        double l = ctr_loss_value(m, data);
        for (double w : m.weights) l += options.l2 * w * w;
        return l;
    };

    double lr = options.learning_rate;
    double prev = objective(out.model);
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        out.loss_trace.push_back(prev);
        auto res = ctr_loss(out.model, data);
        for (std::size_t i = 0; i < kFeatureCount; ++i)
            res.grad.dw[i] += 2.0 * options.l2 * out.model.weights[i];

        // backtracking: keep halving the rate until the objective stops
        // increasing; past 20 halvings the run counts as diverged
        while (true) {
            CtrModel trial = out.model;
            for (std::size_t i = 0; i < kFeatureCount; ++i)
                trial.weights[i] -= lr * res.grad.dw[i];
            trial.bias -= lr * res.grad.db;
            const double cur = objective(trial);
            if (std::isfinite(cur) && cur <= prev + 1e-12 * std::max(1.0, std::abs(prev))) {
                out.model = trial;
                prev = cur;
                break;
            }
            ++out.halvings;
            if (out.halvings > 20)
                throw Diverged(std::isfinite(cur) ? "objective still increasing after 20 halvings"
                                                  : "objective is not finite after 20 halvings");
            lr *= 0.5;
        }
    }
    return out;
}

inline double train_accuracy(const CtrModel& model, const std::vector<CtrExample>& examples,
                             double threshold = 0.5) {
    if (examples.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& ex : examples) {
        const bool predicted = predict_ctr(model, ex.features) >= threshold;
        const bool actual = ex.label >= threshold;
        if (predicted == actual) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(examples.size());
}

// ---- checkpoint io ----------------------------------------------------
// Text format: version line, 10 weight lines, bias line, then 10
// "mean stddev zero_variance" lines.

inline void save_ctr(const CtrModel& model, const std::filesystem::path& path) {
    std::string body = "descgen-ctr v1\n";
    for (double w : model.weights) body += format_double(w) + "\n";
    body += format_double(model.bias) + "\n";
    for (std::size_t i = 0; i < kFeatureCount; ++i)
        body += format_double(model.stats.mean[i]) + " " + format_double(model.stats.stddev[i]) +
                " " + (model.stats.zero_variance[i] ? "1" : "0") + "\n";
    write_file_atomic(path, body);
}

inline CtrModel load_ctr(const std::filesystem::path& path) {
    auto lines = read_lines(path);
    if (lines.size() < 1 + kFeatureCount + 1 + kFeatureCount || lines[0] != "descgen-ctr v1")
        throw DataError("bad ctr checkpoint: " + path.string());
    CtrModel m;
    for (std::size_t i = 0; i < kFeatureCount; ++i) m.weights[i] = parse_double(lines[1 + i]);
    m.bias = parse_double(lines[1 + kFeatureCount]);
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        std::istringstream ss(lines[2 + kFeatureCount + i]);
        std::string mean, stddev, flag;
        if (!(ss >> mean >> stddev >> flag))
            throw DataError("bad ctr checkpoint stats: " + path.string());
        m.stats.mean[i] = parse_double(mean);
        m.stats.stddev[i] = parse_double(stddev);
        m.stats.zero_variance[i] = flag == "1";
    }
    return m;
}

}  // namespace descgen::ctr
