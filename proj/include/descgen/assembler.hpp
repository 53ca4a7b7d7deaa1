#pragma once
// Candidate generation and assembly of enhanced descriptions. Each aspect is
// sampled from the language model conditioned on its control token plus the
// item title, candidates are reranked by a lambda-weighted blend of
// length-normalized log-likelihood and log predicted CTR, and the winning
// texts are concatenated in canonical aspect order.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "descgen/common.hpp"
#include "descgen/corpus.hpp"
#include "descgen/ctr.hpp"
#include "descgen/segmenter.hpp"
#include "descgen/textmodel.hpp"
#include "descgen/trainer.hpp"

namespace descgen::assembler {

struct MissingAspect : DataError {
    segmenter::Aspect aspect;
    explicit MissingAspect(segmenter::Aspect a)
        : DataError(std::string("no candidate for aspect ") + segmenter::aspect_name(a)),
          aspect(a) {}
};

struct Candidate {
    segmenter::Aspect aspect = segmenter::Aspect::kLanguageAppeal;
    textmodel::TokenSequence seq;
    std::string text;
    double norm_loglik = 0.0;    // log-likelihood per generated token, <= 0
    double predicted_ctr = 0.5;  // in (0,1)
    double composite_score = 0.0;
    bool empty_text = false;
    std::size_t index = 0;  // generation order, used as the deterministic tie-break
};

// Both terms live on log scale so lambda interpolates comparable magnitudes.
inline double composite_score(double norm_loglik, double predicted_ctr, double lambda) {
    return lambda * norm_loglik + (1.0 - lambda) * std::log(predicted_ctr);
}

// Rescores every candidate under `lambda` and sorts best-first
// (ties broken by generation order).
inline void rank_candidates(std::vector<Candidate>& candidates, double lambda) {
    for (auto& c : candidates)
        c.composite_score = composite_score(c.norm_loglik, c.predicted_ctr, lambda);
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.composite_score != b.composite_score) return a.composite_score > b.composite_score;
        return a.index < b.index;
    });
}

struct EnhanceContext {
    const trainer::CompositeParams* params = nullptr;
    const textmodel::Vocabulary* vocab = nullptr;
    const segmenter::AspectRuleSet* rules = nullptr;
    textmodel::DecodeConfig decode;
    std::size_t n_candidates = 8;
    double lambda = 0.429;
    std::uint64_t seed = 1;
    std::string manifest_hash;
    std::size_t max_title_tokens = 16;

    void validate() const {
        if (!params || !vocab || !rules) throw ConfigError("enhance context is incomplete");
        if (n_candidates == 0) throw ConfigError("n_candidates must be >= 1");
        if (lambda < 0.0 || lambda > 1.0) throw ConfigError("lambda must lie in [0,1]");
    }
};

inline std::vector<int> generation_prefix(const EnhanceContext& ctx, const corpus::Item& item,
                                          segmenter::Aspect aspect) {
    std::vector<int> prefix;
    prefix.push_back(textmodel::kBosId);
    prefix.push_back(ctx.vocab->id_of(segmenter::aspect_control_token(aspect)));
    auto title_ids = ctx.vocab->encode(item.title);
    if (title_ids.size() > ctx.max_title_tokens) title_ids.resize(ctx.max_title_tokens);
    prefix.insert(prefix.end(), title_ids.begin(), title_ids.end());
    // leave room for at least one generated token plus EOS
    const std::size_t cap = ctx.params->lm.config.context_len - 2;
    if (prefix.size() > cap) prefix.resize(cap);
    return prefix;
}

inline Candidate score_sample(const EnhanceContext& ctx, segmenter::Aspect aspect,
                              const textmodel::SampleResult& sampled, std::size_t prefix_len,
                              std::size_t index) {
    Candidate c;
    c.aspect = aspect;
    c.seq = sampled.seq;
    c.index = index;
    c.empty_text = sampled.empty_text;
    std::vector<int> generated(sampled.seq.ids.begin() + static_cast<std::ptrdiff_t>(prefix_len),
                               sampled.seq.ids.end());
    c.text = ctx.vocab->decode(generated);
    c.norm_loglik =
        sampled.generated > 0 ? sampled.loglik / static_cast<double>(sampled.generated) : 0.0;
    const auto bundle = segmenter::segment(c.text, *ctx.rules);
    const auto features = ctr::extract_features(c.text, bundle, ctx.rules->appeal_lexicon);
    c.predicted_ctr = ctr::predict_ctr(ctx.params->ctr_model, features);
    c.composite_score = composite_score(c.norm_loglik, c.predicted_ctr, ctx.lambda);
    return c;
}

// n_candidates seeded samples for one aspect, sorted best-first under the
// context lambda. Candidate seeds derive from (seed, item, aspect, index), so
// pools are reproducible independent of evaluation order.
inline std::vector<Candidate> generate_aspect(const EnhanceContext& ctx, const corpus::Item& item,
                                              segmenter::Aspect aspect) {
    ctx.validate();
    const auto prefix = generation_prefix(ctx, item, aspect);
    std::vector<Candidate> candidates;
    candidates.reserve(ctx.n_candidates);
    for (std::size_t i = 0; i < ctx.n_candidates; ++i) {
        const std::uint64_t sub_seed =
            mix_seed(ctx.seed, fnv1a64(item.item_id),
                     static_cast<std::uint64_t>(aspect), i);
        auto sampled = textmodel::sample(ctx.params->lm, prefix, ctx.decode, sub_seed);
        candidates.push_back(score_sample(ctx, aspect, sampled, prefix.size(), i));
    }
    rank_candidates(candidates, ctx.lambda);
    return candidates;
}

struct EnhancedDescription {
    std::string item_id;
    std::array<std::string, segmenter::kAspectCount> aspect_texts;
    std::array<std::string, segmenter::kAspectCount> slot_notes;
    std::string assembled;
    double lambda = 0.0;
    std::uint64_t seed = 0;
    std::string manifest_hash;
};

// Canonical-order concatenation with single-space separators; empty slots
// contribute nothing to the assembled string but keep a recorded reason.
inline EnhancedDescription assemble(const std::array<Candidate, segmenter::kAspectCount>& choices,
                                    const corpus::Item& item, double lambda, std::uint64_t seed,
                                    const std::string& manifest_hash) {
    EnhancedDescription out;
    out.item_id = item.item_id;
    out.lambda = lambda;
    out.seed = seed;
    out.manifest_hash = manifest_hash;
    for (std::size_t i = 0; i < segmenter::kAspectCount; ++i) {
        if (choices[i].aspect != segmenter::kAspects[i]) throw MissingAspect(segmenter::kAspects[i]);
        out.aspect_texts[i] = choices[i].text;
        if (choices[i].text.empty())
            out.slot_notes[i] = choices[i].empty_text ? "degenerate sample (immediate EOS)"
                                                      : "empty candidate";
        if (!choices[i].text.empty()) {
            if (!out.assembled.empty()) out.assembled.push_back(' ');
            out.assembled += choices[i].text;
        }
    }
    return out;
}

inline EnhancedDescription enhance_item(const EnhanceContext& ctx, const corpus::Item& item) {
    ctx.validate();
    std::array<Candidate, segmenter::kAspectCount> chosen;
    for (std::size_t i = 0; i < segmenter::kAspectCount; ++i) {
        auto candidates = generate_aspect(ctx, item, segmenter::kAspects[i]);
        chosen[i] = candidates.front();
    }
    return assemble(chosen, item, ctx.lambda, ctx.seed, ctx.manifest_hash);
}

// Uniform composite score of an arbitrary display text; used to order cohort
// items for the rating-based ranking metric.
inline double composite_text_score(const trainer::CompositeParams& params,
                                   const textmodel::Vocabulary& vocab,
                                   const segmenter::AspectRuleSet& rules, const std::string& text,
                                   double lambda) {
    auto ids = vocab.encode(text);
    const std::size_t cap = params.lm.config.context_len - 2;
    if (ids.size() > cap) ids.resize(cap);
    auto seq = textmodel::TokenSequence::wrap(ids);
    const double nll = textmodel::nll_loss_value(params.lm, seq);
    const double norm_loglik = -nll / static_cast<double>(seq.predicted_tokens());
    const auto bundle = segmenter::segment(text, rules);
    const auto features = ctr::extract_features(text, bundle, rules.appeal_lexicon);
    const double ctr_hat = ctr::predict_ctr(params.ctr_model, features);
    return composite_score(norm_loglik, ctr_hat, lambda);
}

// ---- enhanced output records (json lines) --------------------------------

inline std::string to_record(const EnhancedDescription& e, const std::string& config_hash) {
    nlohmann::json j;
    j["item_id"] = e.item_id;
    j["lambda"] = e.lambda;
    j["seed"] = e.seed;
    j["manifest_hash"] = e.manifest_hash;
    j["config_hash"] = config_hash;
    j["assembled"] = e.assembled;
    nlohmann::json aspects;
    nlohmann::json notes;
    for (std::size_t i = 0; i < segmenter::kAspectCount; ++i) {
        aspects[segmenter::aspect_name(segmenter::kAspects[i])] = e.aspect_texts[i];
        if (!e.slot_notes[i].empty())
            notes[segmenter::aspect_name(segmenter::kAspects[i])] = e.slot_notes[i];
    }
    j["aspects"] = aspects;
    if (!notes.empty()) j["notes"] = notes;
    return j.dump();
}

inline void write_enhanced(const std::filesystem::path& path,
                           const std::vector<EnhancedDescription>& items,
                           const std::string& config_hash) {
    std::string body;
    for (const auto& e : items) {
        body += to_record(e, config_hash);
        body.push_back('\n');
    }
    write_file_atomic(path, body);
}

inline std::vector<EnhancedDescription> load_enhanced(const std::filesystem::path& path) {
    std::vector<EnhancedDescription> out;
    std::size_t line_no = 0;
    for (const auto& line : read_lines(path)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            EnhancedDescription e;
            e.item_id = j.at("item_id").get<std::string>();
            e.lambda = j.at("lambda").get<double>();
            e.seed = j.at("seed").get<std::uint64_t>();
            e.manifest_hash = j.at("manifest_hash").get<std::string>();
            e.assembled = j.at("assembled").get<std::string>();
            const auto& aspects = j.at("aspects");
            for (std::size_t i = 0; i < segmenter::kAspectCount; ++i)
                e.aspect_texts[i] =
                    aspects.at(segmenter::aspect_name(segmenter::kAspects[i])).get<std::string>();
            if (j.contains("notes"))
                for (std::size_t i = 0; i < segmenter::kAspectCount; ++i) {
                    const char* name = segmenter::aspect_name(segmenter::kAspects[i]);
                    if (j["notes"].contains(name))
                        e.slot_notes[i] = j["notes"][name].get<std::string>();
                }
            out.push_back(std::move(e));
        } catch (const nlohmann::json::exception& ex) {
            throw DataError("enhanced record line " + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return out;
}

}  // namespace descgen::assembler
