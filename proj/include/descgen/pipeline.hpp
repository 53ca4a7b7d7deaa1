#pragma once
// End-to-end orchestration: split, segment, pretrain the ctr head, run the
// blended training loop, enhance the low-engagement split, evaluate, and
// sweep the blend weight. Every artifact lands under the configured output
// directory and embeds the config hash that produced it.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "descgen/assembler.hpp"
#include "descgen/common.hpp"
#include "descgen/config.hpp"
#include "descgen/corpus.hpp"
#include "descgen/ctr.hpp"
#include "descgen/evalsuite.hpp"
#include "descgen/segmenter.hpp"
#include "descgen/textmodel.hpp"
#include "descgen/trainer.hpp"

namespace descgen::pipeline {

using config::RunConfig;

inline segmenter::AspectRuleSet load_rules(const RunConfig& cfg) {
    auto rules = cfg.rules.empty() ? segmenter::AspectRuleSet::defaults()
                                   : segmenter::AspectRuleSet::load(cfg.rules);
    if (!cfg.lexicon.empty()) rules.load_lexicon(cfg.lexicon);
    return rules;
}

inline textmodel::LmConfig lm_config(const RunConfig& cfg) {
    textmodel::LmConfig lm;
    lm.d_model = cfg.d_model;
    lm.heads = cfg.heads;
    lm.context_len = cfg.context_len;
    lm.vocab_cap = cfg.vocab_cap;
    lm.min_frequency = cfg.min_frequency;
    lm.seed = cfg.seed;
    lm.special_tokens = segmenter::aspect_control_tokens();
    return lm;
}

// One checkpoint set plus everything needed to run generation against it.
struct TrainedBundle {
    std::vector<trainer::CompositeParams> models;  // size 1, or 5 in per-aspect mode
    bool per_aspect = false;
    textmodel::Vocabulary vocab;
    std::string manifest_hash;
    double lambda = 0.429;

    const trainer::CompositeParams& for_aspect(segmenter::Aspect a) const {
        return per_aspect ? models[static_cast<std::size_t>(a)] : models[0];
    }
};

inline std::vector<trainer::TrainingSample> build_training_samples(
    const std::vector<corpus::Item>& train_items, const segmenter::AspectRuleSet& rules,
    const textmodel::Vocabulary& vocab, const RunConfig& cfg) {
    std::vector<trainer::TrainingSample> samples;
    for (const auto& item : train_items) {
        const auto bundle = segmenter::segment(item.description, rules);
        const auto features = ctr::extract_features(item.description, bundle, rules.appeal_lexicon);
        const double label = corpus::empirical_ctr(item).value;
        for (std::size_t a = 0; a < segmenter::kAspectCount; ++a) {
            const auto aspect = segmenter::kAspects[a];
            const std::string text = bundle.joined(aspect);
            if (text.empty()) continue;
            std::vector<int> inner;
            inner.push_back(vocab.id_of(segmenter::aspect_control_token(aspect)));
            auto title_ids = vocab.encode(item.title);
            if (title_ids.size() > cfg.max_title_tokens) title_ids.resize(cfg.max_title_tokens);
            inner.insert(inner.end(), title_ids.begin(), title_ids.end());
            for (int id : vocab.encode(text)) inner.push_back(id);
            if (inner.size() > cfg.context_len - 2) inner.resize(cfg.context_len - 2);
            trainer::TrainingSample s;
            s.sequence = textmodel::TokenSequence::wrap(inner);
            s.ctr_example = ctr::CtrExample{features, label};
            s.aspect = aspect;
            samples.push_back(std::move(s));
        }
    }
    return samples;
}

inline std::vector<ctr::CtrExample> build_ctr_examples(
    const std::vector<corpus::Item>& items, const segmenter::AspectRuleSet& rules) {
    std::vector<ctr::CtrExample> examples;
    examples.reserve(items.size());
    for (const auto& item : items) {
        const auto bundle = segmenter::segment(item.description, rules);
        examples.push_back(ctr::CtrExample{
            ctr::extract_features(item.description, bundle, rules.appeal_lexicon),
            corpus::empirical_ctr(item).value});
    }
    return examples;
}

inline ctr::CtrModel pretrain_ctr(const std::vector<corpus::Item>& train_items,
                                  const segmenter::AspectRuleSet& rules, const RunConfig& cfg) {
    ctr::CtrTrainOptions opt;
    opt.epochs = cfg.ctr_epochs;
    opt.learning_rate = cfg.ctr_lr;
    opt.l2 = cfg.ctr_l2;
    opt.seed = cfg.seed;
    opt.binarize = cfg.ctr_binarize;
    opt.binarize_threshold = cfg.ctr_binarize_threshold;
    return ctr::train_ctr(build_ctr_examples(train_items, rules), opt).model;
}

inline std::string manifest_json(const RunConfig& cfg, std::uint64_t corpus_hash,
                                 std::size_t vocab_size, bool per_aspect) {
    nlohmann::json j;
    j["version"] = 1;
    j["lambda"] = cfg.lambda;
    j["seed"] = cfg.seed;
    j["epochs"] = cfg.epochs;
    j["corpus_hash"] = hash_hex(corpus_hash);
    j["config_hash"] = cfg.hash();
    j["vocab_size"] = vocab_size;
    j["per_aspect"] = per_aspect;
    return j.dump(2) + "\n";
}

inline std::filesystem::path lm_checkpoint_path(const std::filesystem::path& dir,
                                                bool per_aspect, segmenter::Aspect aspect) {
    if (!per_aspect) return dir / "lm.bin";
    return dir / (std::string("lm_") + segmenter::aspect_name(aspect) + ".bin");
}

// Trains the checkpoint set from the train split and writes it out.
inline TrainedBundle run_train(const RunConfig& cfg, const corpus::SplitDataset& split,
                               const segmenter::AspectRuleSet& rules) {
    cfg.validate();
    if (split.train.empty()) throw TrainingError("train split is empty");

    std::vector<std::string> vocab_corpus;
    for (const auto& item : split.train) {
        vocab_corpus.push_back(item.title);
        vocab_corpus.push_back(item.description);
    }
    auto lm_cfg = lm_config(cfg);
    TrainedBundle bundle;
    bundle.vocab = textmodel::Vocabulary::build(vocab_corpus, lm_cfg);
    bundle.per_aspect = cfg.per_aspect_checkpoints;
    bundle.lambda = cfg.lambda;

    auto ctr_model = pretrain_ctr(split.train, rules, cfg);
    auto samples = build_training_samples(split.train, rules, bundle.vocab, cfg);
    if (samples.empty()) throw TrainingError("no training sequences were produced");

    trainer::TrainerConfig tc;
    tc.lambda = cfg.lambda;
    tc.epochs = cfg.epochs;
    tc.learning_rate_lm = cfg.lr_lm;
    tc.learning_rate_ctr = cfg.lr_ctr;
    tc.batch_size = cfg.batch_size;
    tc.seed = cfg.seed;
    tc.clip_norm = cfg.clip_norm;

    if (!bundle.per_aspect) {
        trainer::CompositeParams init;
        init.lm = textmodel::LmParams::init(lm_cfg, bundle.vocab.size());
        init.ctr_model = ctr_model;
        bundle.models.push_back(trainer::train(init, samples, tc).params);
    } else {
        for (std::size_t a = 0; a < segmenter::kAspectCount; ++a) {
            std::vector<trainer::TrainingSample> subset;
            for (const auto& s : samples)
                if (s.aspect == segmenter::kAspects[a]) subset.push_back(s);
            auto aspect_cfg = lm_cfg;
            aspect_cfg.seed = mix_seed(cfg.seed, a);
            trainer::CompositeParams init;
            init.lm = textmodel::LmParams::init(aspect_cfg, bundle.vocab.size());
            init.ctr_model = ctr_model;
            auto aspect_tc = tc;
            aspect_tc.seed = mix_seed(cfg.seed, a, 0x61736f);
            if (subset.empty()) {
                bundle.models.push_back(std::move(init));  // nothing to fit for this aspect
            } else {
                bundle.models.push_back(trainer::train(init, subset, aspect_tc).params);
            }
        }
    }
    return bundle;
}

inline void save_bundle(const TrainedBundle& bundle, const RunConfig& cfg,
                        std::uint64_t corpus_hash) {
    const auto dir = cfg.checkpoint_dir();
    std::filesystem::create_directories(dir);
    bundle.vocab.save(dir / "vocab.txt");
    ctr::save_ctr(bundle.models[0].ctr_model, dir / "ctr.txt");
    if (!bundle.per_aspect) {
        textmodel::save_checkpoint(bundle.models[0].lm, lm_checkpoint_path(dir, false, {}));
    } else {
        for (std::size_t a = 0; a < segmenter::kAspectCount; ++a)
            textmodel::save_checkpoint(bundle.models[a].lm,
                                       lm_checkpoint_path(dir, true, segmenter::kAspects[a]));
    }
    write_file_atomic(dir / "manifest.json",
                      manifest_json(cfg, corpus_hash, bundle.vocab.size(), bundle.per_aspect));
}

inline std::string read_manifest_hash(const std::filesystem::path& dir) {
    return hash_hex(fnv1a64(read_file(dir / "manifest.json")));
}

inline TrainedBundle load_bundle(const RunConfig& cfg) {
    const auto dir = cfg.checkpoint_dir();
    if (!std::filesystem::exists(dir / "manifest.json"))
        throw TrainingError("no trained checkpoints under " + dir.string() +
                            " (run the train command first)");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad manifest: " + std::string(e.what()));
    }
    TrainedBundle bundle;
    bundle.per_aspect = manifest.value("per_aspect", false);
    bundle.lambda = manifest.value("lambda", cfg.lambda);
    bundle.vocab = textmodel::Vocabulary::load(dir / "vocab.txt");
    auto ctr_model = ctr::load_ctr(dir / "ctr.txt");
    if (!bundle.per_aspect) {
        trainer::CompositeParams p;
        p.lm = textmodel::load_checkpoint(lm_checkpoint_path(dir, false, {}));
        p.ctr_model = ctr_model;
        bundle.models.push_back(std::move(p));
    } else {
        for (std::size_t a = 0; a < segmenter::kAspectCount; ++a) {
            trainer::CompositeParams p;
            p.lm = textmodel::load_checkpoint(
                lm_checkpoint_path(dir, true, segmenter::kAspects[a]));
            p.ctr_model = ctr_model;
            bundle.models.push_back(std::move(p));
        }
    }
    bundle.manifest_hash = read_manifest_hash(dir);
    return bundle;
}

// Aspect-wise candidate pools for one item; pools only depend on the seed,
// so decode-time reranking can reuse them across lambda values.
inline std::array<std::vector<assembler::Candidate>, segmenter::kAspectCount> candidate_pools(
    const TrainedBundle& bundle, const segmenter::AspectRuleSet& rules, const RunConfig& cfg,
    const corpus::Item& item, std::uint64_t seed) {
    std::array<std::vector<assembler::Candidate>, segmenter::kAspectCount> pools;
    for (std::size_t a = 0; a < segmenter::kAspectCount; ++a) {
        const auto aspect = segmenter::kAspects[a];
        assembler::EnhanceContext ctx;
        ctx.params = &bundle.for_aspect(aspect);
        ctx.vocab = &bundle.vocab;
        ctx.rules = &rules;
        ctx.decode.temperature = cfg.temperature;
        ctx.decode.top_k = cfg.top_k;
        ctx.decode.max_new_tokens = cfg.max_new_tokens;
        ctx.n_candidates = cfg.n_candidates;
        ctx.lambda = cfg.lambda;
        ctx.seed = seed;
        ctx.manifest_hash = bundle.manifest_hash;
        ctx.max_title_tokens = cfg.max_title_tokens;
        pools[a] = assembler::generate_aspect(ctx, item, aspect);
    }
    return pools;
}

inline assembler::EnhancedDescription select_and_assemble(
    const std::array<std::vector<assembler::Candidate>, segmenter::kAspectCount>& pools,
    const corpus::Item& item, double lambda, std::uint64_t seed,
    const std::string& manifest_hash) {
    std::array<assembler::Candidate, segmenter::kAspectCount> chosen;
    for (std::size_t a = 0; a < segmenter::kAspectCount; ++a) {
        auto pool = pools[a];
        assembler::rank_candidates(pool, lambda);
        chosen[a] = pool.front();
    }
    return assembler::assemble(chosen, item, lambda, seed, manifest_hash);
}

inline std::vector<assembler::EnhancedDescription> run_generate(
    const RunConfig& cfg, const TrainedBundle& bundle, const segmenter::AspectRuleSet& rules,
    const std::vector<corpus::Item>& targets, double lambda, std::uint64_t seed) {
    std::vector<assembler::EnhancedDescription> out;
    out.reserve(targets.size());
    for (const auto& item : targets) {
        auto pools = candidate_pools(bundle, rules, cfg, item, seed);
        out.push_back(select_and_assemble(pools, item, lambda, seed, bundle.manifest_hash));
    }
    return out;
}

// Rating ids: the enhanced variant of an item is rated under "<id>#enhanced".
inline std::string enhanced_rating_id(const std::string& item_id) {
    return item_id + "#enhanced";
}

struct CohortInput {
    std::string name;
    // (item, display text, rating id)
    std::vector<std::tuple<const corpus::Item*, std::string, std::string>> rows;
};

inline evalsuite::EvalReport run_evaluate(const RunConfig& cfg, const TrainedBundle& bundle,
                                          const segmenter::AspectRuleSet& rules,
                                          const corpus::SplitDataset& split,
                                          const std::vector<assembler::EnhancedDescription>& enhanced) {
    std::map<std::string, const assembler::EnhancedDescription*> by_id;
    for (const auto& e : enhanced) by_id[e.item_id] = &e;
    for (const auto& e : enhanced) {
        bool known = false;
        for (const auto& item : split.test) known = known || item.item_id == e.item_id;
        if (!known)
            throw evalsuite::InconsistentIds("enhanced output for unknown test item: " + e.item_id);
    }

    auto ref = evalsuite::ReferenceIndex::build(split.train,
                                                evalsuite::Bm25Params{cfg.k1, cfg.b});

    std::vector<evalsuite::RatingRecord> ratings;
    if (!cfg.ratings.empty()) ratings = evalsuite::load_ratings(cfg.ratings);

    evalsuite::EvalReport report;
    report.lambda = cfg.lambda;
    report.manifest_hash = bundle.manifest_hash;
    report.config_hash = cfg.hash();
    report.k1 = cfg.k1;
    report.b = cfg.b;
    report.ndcg_k = cfg.ndcg_k;

    CohortInput cohorts[3];
    cohorts[0].name = "reference_top";
    for (const auto& item : split.train)
        cohorts[0].rows.emplace_back(&item, item.description, item.item_id);
    cohorts[1].name = "original_bottom";
    for (const auto& item : split.test)
        cohorts[1].rows.emplace_back(&item, item.description, item.item_id);
    cohorts[2].name = "enhanced";
    for (const auto& item : split.test) {
        auto it = by_id.find(item.item_id);
        if (it == by_id.end()) continue;  // enhancement may cover a subset
        cohorts[2].rows.emplace_back(&item, it->second->assembled,
                                     enhanced_rating_id(item.item_id));
    }

    for (std::size_t c = 0; c < 3; ++c) {
        evalsuite::CohortStats stats;
        stats.name = cohorts[c].name;
        // rank by the display text's blended score, best first
        std::vector<std::pair<double, std::string>> ranking;
        for (const auto& [item, text, rating_id] : cohorts[c].rows) {
            stats.per_item_bm25.emplace_back(item->item_id,
                                             evalsuite::item_alignment_score(ref, text, *item));
            const double score = assembler::composite_text_score(
                bundle.models[0], bundle.vocab, rules, text, cfg.lambda);
            ranking.emplace_back(-score, rating_id);
        }
        std::sort(ranking.begin(), ranking.end());
        std::vector<std::string> ranked_ids;
        for (const auto& [_, id] : ranking) ranked_ids.push_back(id);
        stats.finalize();
        if (cfg.ratings.empty()) {
            stats.ndcg_note = "no ratings file configured";
        } else if (ranked_ids.empty()) {
            stats.ndcg_note = "empty cohort";
        } else {
            try {
                stats.ndcg = evalsuite::ndcg_at_k(ranked_ids, ratings, cfg.ndcg_k);
            } catch (const evalsuite::MissingRating& e) {
                stats.ndcg_note = e.what();
            }
        }
        if (c == 0) report.reference_top = std::move(stats);
        else if (c == 1) report.original_bottom = std::move(stats);
        else report.enhanced = std::move(stats);
    }
    return report;
}

struct PipelineResult {
    corpus::SplitDataset split;
    TrainedBundle bundle;
    std::vector<assembler::EnhancedDescription> enhanced;
    evalsuite::EvalReport report;
};

inline void write_split(const RunConfig& cfg, const corpus::SplitDataset& split) {
    const std::filesystem::path out(cfg.out);
    corpus::save_dataset(out / "split" / "train.jsonl", split.train);
    corpus::save_dataset(out / "split" / "test.jsonl", split.test);
    std::string summary = "# config_hash=" + cfg.hash() + "\n";
    summary += "median_ctr=" + format_double(split.median_ctr) + "\n";
    summary += "train=" + std::to_string(split.train.size()) + "\n";
    summary += "test=" + std::to_string(split.test.size()) + "\n";
    write_file_atomic(out / "split" / "summary.txt", summary);
}

inline std::string segments_json(const corpus::Item& item, const segmenter::AspectBundle& bundle) {
    nlohmann::json j;
    j["item_id"] = item.item_id;
    nlohmann::json segs;
    for (std::size_t a = 0; a < segmenter::kAspectCount; ++a) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& span : bundle.segments[a]) arr.push_back(span.text);
        segs[segmenter::aspect_name(segmenter::kAspects[a])] = arr;
    }
    j["segments"] = segs;
    nlohmann::json residual = nlohmann::json::array();
    for (const auto& span : bundle.residual) residual.push_back(span.text);
    j["residual"] = residual;
    return j.dump();
}

inline void write_segments(const RunConfig& cfg, const std::vector<corpus::Item>& items,
                           const segmenter::AspectRuleSet& rules) {
    std::string body = "";
    for (const auto& item : items)
        body += segments_json(item, segmenter::segment(item.description, rules)) + "\n";
    write_file_atomic(std::filesystem::path(cfg.out) / "segments.jsonl", body);
}

// The full run: split, segment, pretrain ctr, train the blend, enhance the
// test split, evaluate. Artifacts land under cfg.out.
inline PipelineResult run_pipeline(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.dataset.empty()) throw DataError("no dataset path configured");
    auto items = corpus::load_dataset(cfg.dataset);
    const std::uint64_t corpus_hash = fnv1a64(read_file(cfg.dataset));

    PipelineResult result;
    result.split = corpus::split_by_engagement(items);
    write_split(cfg, result.split);

    auto rules = load_rules(cfg);
    write_segments(cfg, items, rules);

    result.bundle = run_train(cfg, result.split, rules);
    save_bundle(result.bundle, cfg, corpus_hash);
    result.bundle.manifest_hash = read_manifest_hash(cfg.checkpoint_dir());

    result.enhanced =
        run_generate(cfg, result.bundle, rules, result.split.test, cfg.lambda, cfg.seed);
    assembler::write_enhanced(std::filesystem::path(cfg.out) / "enhanced.jsonl", result.enhanced,
                              cfg.hash());

    result.report = run_evaluate(cfg, result.bundle, rules, result.split, result.enhanced);
    write_file_atomic(std::filesystem::path(cfg.out) / "report.txt",
                      evalsuite::serialize_report(result.report));
    write_file_atomic(std::filesystem::path(cfg.out) / "per_item.csv",
                      evalsuite::report_csv(result.report));
    return result;
}

// ---- ablation ------------------------------------------------------------

struct AblationRow {
    double lambda = 0.0;
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation across seeds
    std::vector<double> per_seed;
};

inline std::vector<double> ablation_grid(const RunConfig& cfg) {
    std::vector<double> grid;
    for (double v = cfg.ablation_grid_start; v <= cfg.ablation_grid_stop + 1e-12;
         v += cfg.ablation_grid_step)
        grid.push_back(std::min(1.0, std::max(0.0, v)));
    return grid;
}

inline double mean_enhanced_bm25(const evalsuite::ReferenceIndex& ref,
                                 const std::vector<corpus::Item>& targets,
                                 const std::vector<assembler::EnhancedDescription>& enhanced) {
    if (enhanced.empty()) return 0.0;
    std::map<std::string, const corpus::Item*> items;
    for (const auto& item : targets) items[item.item_id] = &item;
    double total = 0.0;
    for (const auto& e : enhanced)
        total += evalsuite::item_alignment_score(ref, e.assembled, *items.at(e.item_id));
    return total / static_cast<double>(enhanced.size());
}

enum class AblationMode { kRerank, kRetrain };

inline AblationMode ablation_mode(const RunConfig& cfg) {
    return cfg.ablation_mode == "retrain" ? AblationMode::kRetrain : AblationMode::kRerank;
}

// Rerank mode scores each seed's fixed candidate pools under every lambda;
// retrain mode retrains the full blend per (lambda, seed) with a seed derived
// from the base seed and the lambda index.
inline std::vector<AblationRow> run_ablation(const RunConfig& cfg, AblationMode mode) {
    cfg.validate();
    if (cfg.dataset.empty()) throw DataError("no dataset path configured");
    auto items = corpus::load_dataset(cfg.dataset);
    auto split = corpus::split_by_engagement(items);
    auto rules = load_rules(cfg);
    auto ref = evalsuite::ReferenceIndex::build(split.train,
                                                evalsuite::Bm25Params{cfg.k1, cfg.b});
    const auto grid = ablation_grid(cfg);

    std::vector<AblationRow> rows(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
        rows[g].lambda = grid[g];
        rows[g].per_seed.assign(cfg.ablation_seeds, 0.0);
    }

    if (mode == AblationMode::kRerank) {
        TrainedBundle bundle = load_bundle(cfg);
        for (std::size_t s = 0; s < cfg.ablation_seeds; ++s) {
            const std::uint64_t pool_seed = mix_seed(cfg.seed, 0xab1a7e, s);
            // pools are lambda-independent: generate once per seed
            std::vector<std::array<std::vector<assembler::Candidate>, segmenter::kAspectCount>>
                pools;
            pools.reserve(split.test.size());
            for (const auto& item : split.test)
                pools.push_back(candidate_pools(bundle, rules, cfg, item, pool_seed));
            for (std::size_t g = 0; g < grid.size(); ++g) {
                std::vector<assembler::EnhancedDescription> enhanced;
                enhanced.reserve(split.test.size());
                for (std::size_t i = 0; i < split.test.size(); ++i)
                    enhanced.push_back(select_and_assemble(pools[i], split.test[i], grid[g],
                                                           pool_seed, bundle.manifest_hash));
                rows[g].per_seed[s] = mean_enhanced_bm25(ref, split.test, enhanced);
            }
        }
    } else {
        for (std::size_t g = 0; g < grid.size(); ++g) {
            for (std::size_t s = 0; s < cfg.ablation_seeds; ++s) {
                RunConfig point = cfg;
                point.lambda = grid[g];
                point.seed = mix_seed(cfg.seed, g, s);
                auto bundle = run_train(point, split, rules);
                bundle.manifest_hash = "retrain-" + hash_hex(point.seed);
                auto enhanced = run_generate(point, bundle, rules, split.test, point.lambda,
                                             point.seed);
                rows[g].per_seed[s] = mean_enhanced_bm25(ref, split.test, enhanced);
            }
        }
    }

    for (auto& row : rows) {
        double total = 0.0;
        for (double v : row.per_seed) total += v;
        row.mean = total / static_cast<double>(row.per_seed.size());
        if (row.per_seed.size() > 1) {
            double ss = 0.0;
            for (double v : row.per_seed) ss += (v - row.mean) * (v - row.mean);
            row.stddev = std::sqrt(ss / static_cast<double>(row.per_seed.size() - 1));
        }
    }
    return rows;
}

inline std::string ablation_csv(const std::vector<AblationRow>& rows, const RunConfig& cfg) {
    std::string out = "# config_hash=" + cfg.hash() + "\n";
    out += "lambda,mean_bm25,std_bm25";
    const std::size_t seeds = rows.empty() ? 0 : rows[0].per_seed.size();
    for (std::size_t s = 0; s < seeds; ++s) out += ",seed_" + std::to_string(s);
    out += "\n";
    for (const auto& row : rows) {
        out += format_double(row.lambda) + "," + format_double(row.mean) + "," +
               format_double(row.stddev);
        for (double v : row.per_seed) out += "," + format_double(v);
        out += "\n";
    }
    return out;
}

inline std::vector<AblationRow> parse_ablation_csv(const std::string& text) {
    std::vector<AblationRow> rows;
    std::size_t start = 0;
    bool header_seen = false;
    while (start < text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string::npos) nl = text.size();
        std::string line = text.substr(start, nl - start);
        start = nl + 1;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        std::vector<std::string> fields;
        std::size_t fs = 0;
        while (fs <= line.size()) {
            auto comma = line.find(',', fs);
            if (comma == std::string::npos) comma = line.size();
            fields.push_back(line.substr(fs, comma - fs));
            fs = comma + 1;
        }
        if (fields.size() < 3) throw DataError("bad ablation row: " + line);
        AblationRow row;
        row.lambda = parse_double(fields[0]);
        row.mean = parse_double(fields[1]);
        row.stddev = parse_double(fields[2]);
        for (std::size_t i = 3; i < fields.size(); ++i)
            row.per_seed.push_back(parse_double(fields[i]));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace descgen::pipeline
