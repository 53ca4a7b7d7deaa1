#pragma once
// The blended training objective: lambda * NLL + (1 - lambda) * CTR over
// disjoint parameter blocks (language model, ctr head), with mini-batch
// gradient descent, norm clipping, and a finite-difference audit utility.

#include <cmath>
#include <string>
#include <vector>

#include "descgen/common.hpp"
#include "descgen/ctr.hpp"
#include "descgen/rng.hpp"
#include "descgen/segmenter.hpp"
#include "descgen/textmodel.hpp"

namespace descgen::trainer {

struct CompositeParams {
    textmodel::LmParams lm;
    ctr::CtrModel ctr_model;
};

struct TrainerConfig {
    double lambda = 0.429;
    std::size_t epochs = 40;
    double learning_rate_lm = 0.3;
    double learning_rate_ctr = 0.05;
    std::size_t batch_size = 16;
    std::uint64_t seed = 1;
    double clip_norm = 5.0;

    void validate() const {
        if (lambda < 0.0 || lambda > 1.0) throw ConfigError("lambda must lie in [0,1]");
        if (learning_rate_lm <= 0.0 || learning_rate_ctr <= 0.0)
            throw ConfigError("learning rates must be positive");
        if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    }
};

struct TrainingSample {
    textmodel::TokenSequence sequence;
    ctr::CtrExample ctr_example;
    segmenter::Aspect aspect = segmenter::Aspect::kLanguageAppeal;
};

struct EmptyBatch : TrainingError {
    EmptyBatch() : TrainingError("composite loss requires a non-empty batch") {}
};
struct Diverged : TrainingError {
    Diverged() : TrainingError("composite training loss is not finite") {}
};

struct CompositeGrad {
    textmodel::LmParams lm;  // same shapes as the model block
    ctr::CtrGrad ctr_grad;
};

struct CompositeLossResult {
    double value = 0.0;
    double nll_part = 0.0;  // unweighted sum over the batch
    double ctr_part = 0.0;  // unweighted sum over the batch
    CompositeGrad grad;
};

// value = lambda * sum NLL(seq) + (1 - lambda) * sum BCE(ctr example);
// the lm gradient block is lambda * dNLL and the ctr block (1-lambda) * dBCE,
// so either endpoint zeroes the other block exactly.
inline CompositeLossResult composite_loss(const CompositeParams& params,
                                          const std::vector<TrainingSample>& batch,
                                          double lambda) {
    if (batch.empty()) throw EmptyBatch();
    if (lambda < 0.0 || lambda > 1.0) throw ConfigError("lambda must lie in [0,1]");

    CompositeLossResult out;
    out.grad.lm = textmodel::LmParams::zeros_like(params.lm);

    if (lambda != 0.0) {
        textmodel::LmParams lm_grad = textmodel::LmParams::zeros_like(params.lm);
        for (const auto& sample : batch)
            out.nll_part += textmodel::nll_loss_accumulate(params.lm, sample.sequence, lm_grad);
        lm_grad.for_each_tensor([&](const char* name, const Tensor& g) {
            out.grad.lm.for_each_tensor([&](const char* name2, Tensor& dst) {
                if (std::string(name) == name2) axpy(dst, lambda, g);
            });
        });
    } else {
        for (const auto& sample : batch)
            out.nll_part += textmodel::nll_loss_value(params.lm, sample.sequence);
    }

    std::vector<ctr::CtrExample> ctr_batch;
    ctr_batch.reserve(batch.size());
    for (const auto& sample : batch) ctr_batch.push_back(sample.ctr_example);
    auto ctr_res = ctr::ctr_loss(params.ctr_model, ctr_batch);
    out.ctr_part = ctr_res.loss;
    const double ctr_weight = 1.0 - lambda;
    for (std::size_t i = 0; i < ctr::kFeatureCount; ++i)
        out.grad.ctr_grad.dw[i] = ctr_weight * ctr_res.grad.dw[i];
    out.grad.ctr_grad.db = ctr_weight * ctr_res.grad.db;

    out.value = lambda * out.nll_part + ctr_weight * out.ctr_part;
    return out;
}

inline double composite_loss_value(const CompositeParams& params,
                                   const std::vector<TrainingSample>& batch, double lambda) {
    if (batch.empty()) throw EmptyBatch();
    double nll = 0.0;
    for (const auto& sample : batch)
        nll += textmodel::nll_loss_value(params.lm, sample.sequence);
    std::vector<ctr::CtrExample> ctr_batch;
    ctr_batch.reserve(batch.size());
    for (const auto& sample : batch) ctr_batch.push_back(sample.ctr_example);
    const double bce = ctr::ctr_loss_value(params.ctr_model, ctr_batch);
    return lambda * nll + (1.0 - lambda) * bce;
}

struct EpochTrace {
    double total = 0.0;     // mean weighted loss per sample
    double nll = 0.0;       // mean NLL per sequence
    double ctr_bce = 0.0;   // mean BCE per example
};

struct TrainResult {
    CompositeParams params;
    std::vector<EpochTrace> trace;
};

namespace detail {

inline double grad_squared_norm(const CompositeGrad& g) {
    double n2 = 0.0;
    g.lm.for_each_tensor([&](const char*, const Tensor& t) { n2 += squared_norm(t); });
    for (double v : g.ctr_grad.dw) n2 += v * v;
    n2 += g.ctr_grad.db * g.ctr_grad.db;
    return n2;
}

inline void apply_update(CompositeParams& params, const CompositeGrad& g, double lr_lm,
                         double lr_ctr, double scale) {
    g.lm.for_each_tensor([&](const char* name, const Tensor& t) {
        params.lm.for_each_tensor([&](const char* name2, Tensor& dst) {
            if (std::string(name) == name2) axpy(dst, -lr_lm * scale, t);
        });
    });
    for (std::size_t i = 0; i < ctr::kFeatureCount; ++i)
        params.ctr_model.weights[i] -= lr_ctr * scale * g.ctr_grad.dw[i];
    params.ctr_model.bias -= lr_ctr * scale * g.ctr_grad.db;
}

}  // namespace detail

// Mini-batch gradient descent over the blended objective. Per-epoch shuffling
// is seeded, batch gradients are averaged, and the joint gradient norm is
// clipped before each update, so runs with the same config are bit-identical.
inline TrainResult train(const CompositeParams& init,
                         const std::vector<TrainingSample>& samples,
                         const TrainerConfig& config) {
    config.validate();
    if (samples.empty()) throw TrainingError("training requires at least one sample");

    TrainResult out;
    out.params = init;
    Rng shuffle_rng(mix_seed(config.seed, 0x7261696e));

    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        EpochTrace trace;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            std::vector<TrainingSample> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) batch.push_back(samples[order[i]]);

            auto res = composite_loss(out.params, batch, config.lambda);
            if (!std::isfinite(res.value)) throw Diverged();
            trace.total += res.value;
            trace.nll += res.nll_part;
            trace.ctr_bce += res.ctr_part;

            const double inv_batch = 1.0 / static_cast<double>(batch.size());
            const double norm =
                std::sqrt(detail::grad_squared_norm(res.grad)) * inv_batch;
            double scale = inv_batch;
            if (config.clip_norm > 0.0 && norm > config.clip_norm)
                scale *= config.clip_norm / norm;
            detail::apply_update(out.params, res.grad, config.learning_rate_lm,
                                 config.learning_rate_ctr, scale);
        }
        const double n = static_cast<double>(samples.size());
        trace.total /= n;
        trace.nll /= n;
        trace.ctr_bce /= n;
        out.trace.push_back(trace);
    }
    return out;
}

struct GradCheckReport {
    double lm_max_rel_err = 0.0;
    double ctr_max_rel_err = 0.0;
    double lm_max_abs_numeric = 0.0;   // largest |finite difference| seen in the block
    double ctr_max_abs_numeric = 0.0;
    std::size_t lm_probes = 0;
    std::size_t ctr_probes = 0;
};

// Central-difference audit of the composite gradient at randomly sampled
// coordinates in each block.
inline GradCheckReport grad_check(const CompositeParams& params,
                                  const std::vector<TrainingSample>& batch, double lambda,
                                  double step, std::size_t samples_per_block,
                                  std::uint64_t seed = 17) {
    if (step <= 0.0) throw ConfigError("grad_check step must be positive");
    auto analytic = composite_loss(params, batch, lambda);
    CompositeParams work = params;
    Rng rng(seed);
    GradCheckReport report;

    auto rel_err = [](double a, double n) {
        const double denom = std::max({std::abs(a), std::abs(n), 1e-8});
        return std::abs(a - n) / denom;
    };
    auto numeric_at = [&](double* coord) {
        const double saved = *coord;
        *coord = saved + step;
        const double fp = composite_loss_value(work, batch, lambda);
        *coord = saved - step;
        const double fm = composite_loss_value(work, batch, lambda);
        *coord = saved;
        return (fp - fm) / (2.0 * step);
    };

    const std::size_t lm_size = work.lm.flat_size();
    for (std::size_t probe = 0; probe < samples_per_block; ++probe) {
        const std::size_t idx = static_cast<std::size_t>(rng.next_below(lm_size));
        const double a = *analytic.grad.lm.flat_at(idx);
        const double n = numeric_at(work.lm.flat_at(idx));
        report.lm_max_rel_err = std::max(report.lm_max_rel_err, rel_err(a, n));
        report.lm_max_abs_numeric = std::max(report.lm_max_abs_numeric, std::abs(n));
        ++report.lm_probes;
    }
    for (std::size_t probe = 0; probe < samples_per_block; ++probe) {
        const std::size_t idx = static_cast<std::size_t>(rng.next_below(ctr::kFeatureCount + 1));
        double* coord = idx < ctr::kFeatureCount ? &work.ctr_model.weights[idx]
                                                 : &work.ctr_model.bias;
        const double a = idx < ctr::kFeatureCount ? analytic.grad.ctr_grad.dw[idx]
                                                  : analytic.grad.ctr_grad.db;
        const double n = numeric_at(coord);
        report.ctr_max_rel_err = std::max(report.ctr_max_rel_err, rel_err(a, n));
        report.ctr_max_abs_numeric = std::max(report.ctr_max_abs_numeric, std::abs(n));
        ++report.ctr_probes;
    }
    return report;
}

}  // namespace descgen::trainer
