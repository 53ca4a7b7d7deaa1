#pragma once
// Command-line wiring. Every subcommand resolves a RunConfig from an optional
// key=value config file plus flag overrides, then drives the pipeline ops.
// Exit codes: 0 ok, 2 config, 3 data, 4 training, 5 eval.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "descgen/config.hpp"
#include "descgen/pipeline.hpp"

namespace descgen::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitTraining = 4;
inline constexpr int kExitEval = 5;

namespace detail {

struct CommonFlags {
    std::string config_path;
    std::vector<std::string> overrides;  // key=value
    std::string dataset, out, rules, lexicon, ratings, checkpoints;
    std::string lambda, seed;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key=value config file");
        cmd->add_option("--set", overrides, "override any config key (key=value, repeatable)");
        cmd->add_option("--dataset", dataset, "item dataset (json lines)");
        cmd->add_option("--out", out, "output directory");
        cmd->add_option("--rules", rules, "aspect rule file (tsv)");
        cmd->add_option("--lexicon", lexicon, "appeal lexicon file");
        cmd->add_option("--ratings", ratings, "ratings file (json lines)");
        cmd->add_option("--checkpoints", checkpoints, "checkpoint directory");
        cmd->add_option("--lambda", lambda, "blend weight in [0,1]");
        cmd->add_option("--seed", seed, "base random seed");
    }

    config::RunConfig resolve() const {
        config::RunConfig cfg;
        if (!config_path.empty()) cfg.apply_file(config_path);
        auto maybe = [&](const char* key, const std::string& v) {
            if (!v.empty()) cfg.set(key, v);
        };
        maybe("dataset", dataset);
        maybe("out", out);
        maybe("rules", rules);
        maybe("lexicon", lexicon);
        maybe("ratings", ratings);
        maybe("checkpoints", checkpoints);
        maybe("lambda", lambda);
        maybe("seed", seed);
        for (const auto& kv : overrides) {
            auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw ConfigError("--set expects key=value, got '" + kv + "'");
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        cfg.validate();
        return cfg;
    }
};

inline corpus::SplitDataset load_and_split(const config::RunConfig& cfg) {
    if (cfg.dataset.empty()) throw DataError("no dataset path configured");
    return corpus::split_by_engagement(corpus::load_dataset(cfg.dataset));
}

inline void print_report_summary(std::ostream& out, const evalsuite::EvalReport& report) {
    out << "cohort            count  mean_bm25  ndcg@" << report.ndcg_k << "\n";
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& c = report.cohort(i);
        char line[160];
        if (c.ndcg)
            std::snprintf(line, sizeof(line), "%-17s %5zu  %9.4f  %.4f", c.name.c_str(), c.count,
                          c.mean_bm25, *c.ndcg);
        else
            std::snprintf(line, sizeof(line), "%-17s %5zu  %9.4f  (%s)", c.name.c_str(), c.count,
                          c.mean_bm25, c.ndcg_note.c_str());
        out << line << "\n";
    }
    out << "lambda=" << format_double(report.lambda) << " manifest=" << report.manifest_hash
        << " config=" << report.config_hash << "\n";
}

}  // namespace detail

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"aspect-oriented product description pipeline"};
    app.require_subcommand(1);

    detail::CommonFlags ingest_f, split_f, segment_f, trainctr_f, train_f, generate_f,
        evaluate_f, ablate_f, pipeline_f;
    std::string report_path, ablation_path, ablate_mode_flag, evaluate_enhanced;

    auto* cmd_ingest = app.add_subcommand("ingest", "load and validate a dataset");
    ingest_f.attach(cmd_ingest);
    auto* cmd_split = app.add_subcommand("split", "engagement split into train/test");
    split_f.attach(cmd_split);
    auto* cmd_segment = app.add_subcommand("segment", "aspect segmentation of all items");
    segment_f.attach(cmd_segment);
    auto* cmd_trainctr = app.add_subcommand("train-ctr", "fit the ctr head on the train split");
    trainctr_f.attach(cmd_trainctr);
    auto* cmd_train = app.add_subcommand("train", "train the blended checkpoints");
    train_f.attach(cmd_train);
    auto* cmd_generate = app.add_subcommand("generate", "enhance the test split");
    generate_f.attach(cmd_generate);
    auto* cmd_evaluate = app.add_subcommand("evaluate", "score cohorts into a report");
    evaluate_f.attach(cmd_evaluate);
    cmd_evaluate->add_option("--enhanced", evaluate_enhanced,
                             "enhanced records (default <out>/enhanced.jsonl)");
    auto* cmd_ablate = app.add_subcommand("ablate", "sweep the blend weight");
    ablate_f.attach(cmd_ablate);
    cmd_ablate->add_option("--mode", ablate_mode_flag, "rerank or retrain");
    auto* cmd_report = app.add_subcommand("report", "print a report summary");
    cmd_report->add_option("path", report_path, "report file")->required();
    cmd_report->add_option("--ablation", ablation_path, "ablation csv to summarize");
    auto* cmd_pipeline = app.add_subcommand("pipeline", "full run: split to report");
    pipeline_f.attach(cmd_pipeline);

    try {
        std::vector<const char*> argv;
        argv.push_back("descgen");
        for (const auto& a : args) argv.push_back(a.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "argument error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        if (cmd_ingest->parsed()) {
            auto cfg = ingest_f.resolve();
            if (cfg.dataset.empty()) throw DataError("no dataset path configured");
            auto items = corpus::load_dataset(cfg.dataset);
            std::size_t empty = 0;
            for (const auto& item : items)
                if (item.lacks_description()) ++empty;
            out << "items=" << items.size() << " empty_descriptions=" << empty << "\n";
            if (!cfg.out.empty()) {
                corpus::save_dataset(std::filesystem::path(cfg.out) / "items.jsonl", items);
                out << "wrote " << (std::filesystem::path(cfg.out) / "items.jsonl").string()
                    << "\n";
            }
        } else if (cmd_split->parsed()) {
            auto cfg = split_f.resolve();
            auto split = detail::load_and_split(cfg);
            pipeline::write_split(cfg, split);
            out << "train=" << split.train.size() << " test=" << split.test.size()
                << " median_ctr=" << format_double(split.median_ctr) << "\n";
        } else if (cmd_segment->parsed()) {
            auto cfg = segment_f.resolve();
            if (cfg.dataset.empty()) throw DataError("no dataset path configured");
            auto items = corpus::load_dataset(cfg.dataset);
            auto rules = pipeline::load_rules(cfg);
            pipeline::write_segments(cfg, items, rules);
            std::array<std::size_t, segmenter::kAspectCount> counts{};
            std::size_t residual = 0;
            for (const auto& item : items) {
                auto bundle = segmenter::segment(item.description, rules);
                for (std::size_t a = 0; a < segmenter::kAspectCount; ++a)
                    counts[a] += bundle.segments[a].size();
                residual += bundle.residual.size();
            }
            for (std::size_t a = 0; a < segmenter::kAspectCount; ++a)
                out << segmenter::aspect_name(segmenter::kAspects[a]) << "=" << counts[a] << "\n";
            out << "residual=" << residual << "\n";
        } else if (cmd_trainctr->parsed()) {
            auto cfg = trainctr_f.resolve();
            auto split = detail::load_and_split(cfg);
            auto rules = pipeline::load_rules(cfg);
            auto model = pipeline::pretrain_ctr(split.train, rules, cfg);
            const auto dir = cfg.checkpoint_dir();
            std::filesystem::create_directories(dir);
            ctr::save_ctr(model, dir / "ctr.txt");
            out << "wrote " << (dir / "ctr.txt").string() << "\n";
        } else if (cmd_train->parsed()) {
            auto cfg = train_f.resolve();
            if (cfg.dataset.empty()) throw DataError("no dataset path configured");
            auto items = corpus::load_dataset(cfg.dataset);
            const auto corpus_hash = fnv1a64(read_file(cfg.dataset));
            auto split = corpus::split_by_engagement(items);
            auto rules = pipeline::load_rules(cfg);
            auto bundle = pipeline::run_train(cfg, split, rules);
            pipeline::save_bundle(bundle, cfg, corpus_hash);
            out << "checkpoints under " << cfg.checkpoint_dir().string() << "\n";
        } else if (cmd_generate->parsed()) {
            auto cfg = generate_f.resolve();
            auto split = detail::load_and_split(cfg);
            auto rules = pipeline::load_rules(cfg);
            auto bundle = pipeline::load_bundle(cfg);
            auto enhanced =
                pipeline::run_generate(cfg, bundle, rules, split.test, cfg.lambda, cfg.seed);
            assembler::write_enhanced(std::filesystem::path(cfg.out) / "enhanced.jsonl", enhanced,
                                      cfg.hash());
            out << "enhanced " << enhanced.size() << " items\n";
        } else if (cmd_evaluate->parsed()) {
            auto cfg = evaluate_f.resolve();
            auto split = detail::load_and_split(cfg);
            auto rules = pipeline::load_rules(cfg);
            auto bundle = pipeline::load_bundle(cfg);
            const auto enhanced_path = evaluate_enhanced.empty()
                                           ? std::filesystem::path(cfg.out) / "enhanced.jsonl"
                                           : std::filesystem::path(evaluate_enhanced);
            auto enhanced = assembler::load_enhanced(enhanced_path);
            auto report = pipeline::run_evaluate(cfg, bundle, rules, split, enhanced);
            write_file_atomic(std::filesystem::path(cfg.out) / "report.txt",
                              evalsuite::serialize_report(report));
            write_file_atomic(std::filesystem::path(cfg.out) / "per_item.csv",
                              evalsuite::report_csv(report));
            detail::print_report_summary(out, report);
        } else if (cmd_ablate->parsed()) {
            auto cfg = ablate_f.resolve();
            if (!ablate_mode_flag.empty()) cfg.set("ablation_mode", ablate_mode_flag);
            cfg.validate();
            auto rows = pipeline::run_ablation(cfg, pipeline::ablation_mode(cfg));
            write_file_atomic(std::filesystem::path(cfg.out) / "ablation.csv",
                              pipeline::ablation_csv(rows, cfg));
            double best_lambda = 0.0, best_mean = -1.0;
            for (const auto& row : rows)
                if (row.mean > best_mean) {
                    best_mean = row.mean;
                    best_lambda = row.lambda;
                }
            out << "grid_points=" << rows.size()
                << " best_lambda=" << format_double(best_lambda)
                << " best_mean_bm25=" << format_double(best_mean) << "\n";
        } else if (cmd_report->parsed()) {
            evalsuite::EvalReport report;
            try {
                report = evalsuite::load_report(report_path);
            } catch (const DataError& e) {
                throw EvalError(e.what());
            }
            detail::print_report_summary(out, report);
            if (!ablation_path.empty()) {
                std::vector<pipeline::AblationRow> rows;
                try {
                    rows = pipeline::parse_ablation_csv(read_file(ablation_path));
                } catch (const DataError& e) {
                    throw EvalError(e.what());
                }
                double best_lambda = 0.0, best_mean = -1.0;
                for (const auto& row : rows)
                    if (row.mean > best_mean) {
                        best_mean = row.mean;
                        best_lambda = row.lambda;
                    }
                out << "ablation peak: lambda=" << format_double(best_lambda)
                    << " mean_bm25=" << format_double(best_mean) << "\n";
            }
        } else if (cmd_pipeline->parsed()) {
            auto cfg = pipeline_f.resolve();
            auto result = pipeline::run_pipeline(cfg);
            detail::print_report_summary(out, result.report);
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const EvalError& e) {
        err << "eval error: " << e.what() << "\n";
        return kExitEval;
    } catch (const TrainingError& e) {
        err << "training error: " << e.what() << "\n";
        return kExitTraining;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitOk;
}

}  // namespace descgen::cli
