#pragma once
// Flat key=value run configuration. Every tunable has a named key; files and
// CLI flags both funnel through set(), and hash() fingerprints the resolved
// configuration for embedding in output artifacts.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "descgen/common.hpp"

namespace descgen::config {

struct RunConfig {
    // paths
    std::string dataset;
    std::string rules;        // empty: built-in default rule set
    std::string lexicon;      // empty: built-in appeal lexicon
    std::string ratings;      // empty: rating-based metrics are skipped
    std::string out = "out";
    std::string checkpoints;  // empty: <out>/checkpoints

    double lambda = 0.429;
    std::uint64_t seed = 1;

    // language model
    std::size_t d_model = 64;
    std::size_t heads = 2;
    std::size_t context_len = 128;
    std::size_t vocab_cap = 8192;
    std::size_t min_frequency = 1;

    // blended training
    std::size_t epochs = 40;
    double lr_lm = 0.3;
    double lr_ctr = 0.05;
    std::size_t batch_size = 16;
    double clip_norm = 5.0;
    bool per_aspect_checkpoints = false;

    // ctr pretraining
    std::size_t ctr_epochs = 300;
    double ctr_lr = 0.5;
    double ctr_l2 = 1e-4;
    bool ctr_binarize = false;
    double ctr_binarize_threshold = 0.5;

    // decoding
    std::size_t n_candidates = 8;
    std::size_t top_k = 20;
    double temperature = 1.0;
    std::size_t max_new_tokens = 24;
    std::size_t max_title_tokens = 16;

    // evaluation
    double k1 = 1.2;
    double b = 0.75;
    std::size_t ndcg_k = 10;

    // ablation sweep
    double ablation_grid_start = 0.0;
    double ablation_grid_stop = 1.0;
    double ablation_grid_step = 0.05;
    std::size_t ablation_seeds = 5;
    std::string ablation_mode = "rerank";  // rerank | retrain

    void set(const std::string& key, const std::string& value);
    std::string canonical() const;
    std::string hash() const { return hash_hex(fnv1a64(canonical())); }
    void validate() const;

    static RunConfig from_file(const std::filesystem::path& path) {
        RunConfig cfg;
        cfg.apply_file(path);
        return cfg;
    }

    void apply_file(const std::filesystem::path& path) {
        std::size_t line_no = 0;
        std::vector<std::string> lines;
        try {
            lines = read_lines(path);
        } catch (const DataError& e) {
            throw ConfigError(e.what());
        }
        for (const auto& raw : lines) {
            ++line_no;
            const std::string line = trim(raw);
            if (line.empty() || line[0] == '#') continue;
            auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": expected key=value");
            set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }

    std::filesystem::path checkpoint_dir() const {
        return checkpoints.empty() ? std::filesystem::path(out) / "checkpoints"
                                   : std::filesystem::path(checkpoints);
    }
};

namespace detail {

struct Binding {
    const char* key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        return std::stoull(v);
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": expected an unsigned integer, got '" + v + "'");
    }
}

inline double parse_real(const std::string& key, const std::string& v) {
    try {
        return parse_double(v);
    } catch (const DataError&) {
        throw ConfigError("config key " + key + ": expected a number, got '" + v + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw ConfigError("config key " + key + ": expected a boolean, got '" + v + "'");
}

inline const std::vector<Binding>& bindings() {
    static const std::vector<Binding> table = [] {
        std::vector<Binding> t;
        auto add_string = [&](const char* key, std::string RunConfig::* m) {
            t.push_back({key, [m](const RunConfig& c) { return c.*m; },
                         [m](RunConfig& c, const std::string& v) { c.*m = v; }});
        };
        auto add_size = [&](const char* key, std::size_t RunConfig::* m) {
            t.push_back({key,
                         [m](const RunConfig& c) { return std::to_string(c.*m); },
                         [m](RunConfig& c, const std::string& v) {
                             c.*m = static_cast<std::size_t>(parse_u64("", v));
                         }});
        };
        auto add_u64 = [&](const char* key, std::uint64_t RunConfig::* m) {
            t.push_back({key,
                         [m](const RunConfig& c) { return std::to_string(c.*m); },
                         [m](RunConfig& c, const std::string& v) { c.*m = parse_u64("", v); }});
        };
        auto add_real = [&](const char* key, double RunConfig::* m) {
            t.push_back({key,
                         [m](const RunConfig& c) { return format_double(c.*m); },
                         [m](RunConfig& c, const std::string& v) { c.*m = parse_real("", v); }});
        };
        auto add_bool = [&](const char* key, bool RunConfig::* m) {
            t.push_back({key,
                         [m](const RunConfig& c) { return std::string(c.*m ? "1" : "0"); },
                         [m](RunConfig& c, const std::string& v) { c.*m = parse_bool("", v); }});
        };

        add_string("dataset", &RunConfig::dataset);
        add_string("rules", &RunConfig::rules);
        add_string("lexicon", &RunConfig::lexicon);
        add_string("ratings", &RunConfig::ratings);
        add_string("out", &RunConfig::out);
        add_string("checkpoints", &RunConfig::checkpoints);
        add_real("lambda", &RunConfig::lambda);
        add_u64("seed", &RunConfig::seed);
        add_size("d_model", &RunConfig::d_model);
        add_size("heads", &RunConfig::heads);
        add_size("context_len", &RunConfig::context_len);
        add_size("vocab_cap", &RunConfig::vocab_cap);
        add_size("min_frequency", &RunConfig::min_frequency);
        add_size("epochs", &RunConfig::epochs);
        add_real("lr_lm", &RunConfig::lr_lm);
        add_real("lr_ctr", &RunConfig::lr_ctr);
        add_size("batch_size", &RunConfig::batch_size);
        add_real("clip_norm", &RunConfig::clip_norm);
        add_bool("per_aspect_checkpoints", &RunConfig::per_aspect_checkpoints);
        add_size("ctr_epochs", &RunConfig::ctr_epochs);
        add_real("ctr_lr", &RunConfig::ctr_lr);
        add_real("ctr_l2", &RunConfig::ctr_l2);
        add_bool("ctr_binarize", &RunConfig::ctr_binarize);
        add_real("ctr_binarize_threshold", &RunConfig::ctr_binarize_threshold);
        add_size("n_candidates", &RunConfig::n_candidates);
        add_size("top_k", &RunConfig::top_k);
        add_real("temperature", &RunConfig::temperature);
        add_size("max_new_tokens", &RunConfig::max_new_tokens);
        add_size("max_title_tokens", &RunConfig::max_title_tokens);
        add_real("k1", &RunConfig::k1);
        add_real("b", &RunConfig::b);
        add_size("ndcg_k", &RunConfig::ndcg_k);
        add_real("ablation_grid_start", &RunConfig::ablation_grid_start);
        add_real("ablation_grid_stop", &RunConfig::ablation_grid_stop);
        add_real("ablation_grid_step", &RunConfig::ablation_grid_step);
        add_size("ablation_seeds", &RunConfig::ablation_seeds);
        add_string("ablation_mode", &RunConfig::ablation_mode);
        return t;
    }();
    return table;
}

}  // namespace detail

inline void RunConfig::set(const std::string& key, const std::string& value) {
    for (const auto& b : detail::bindings()) {
        if (key == b.key) {
            try {
                b.set(*this, value);
            } catch (const ConfigError&) {
                throw ConfigError("config key " + key + ": invalid value '" + value + "'");
            }
            return;
        }
    }
    throw ConfigError("unknown config key: " + key);
}

inline std::string RunConfig::canonical() const {
    std::map<std::string, std::string> kv;
    for (const auto& b : detail::bindings()) kv[b.key] = b.get(*this);
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

inline void RunConfig::validate() const {
    if (lambda < 0.0 || lambda > 1.0) throw ConfigError("lambda must lie in [0,1]");
    if (d_model == 0 || heads == 0 || d_model % heads != 0)
        throw ConfigError("d_model must be a positive multiple of heads");
    if (context_len < 4) throw ConfigError("context_len must be >= 4");
    if (temperature <= 0.0) throw ConfigError("temperature must be > 0");
    if (n_candidates == 0 || top_k == 0) throw ConfigError("n_candidates and top_k must be >= 1");
    if (ablation_grid_start < 0.0 || ablation_grid_stop > 1.0 ||
        ablation_grid_start > ablation_grid_stop)
        throw ConfigError("ablation grid must lie inside [0,1]");
    if (ablation_grid_step <= 0.0) throw ConfigError("ablation_grid_step must be > 0");
    if (ablation_seeds == 0) throw ConfigError("ablation_seeds must be >= 1");
    if (ablation_mode != "rerank" && ablation_mode != "retrain")
        throw ConfigError("ablation_mode must be rerank or retrain");
    if (k1 < 0.0 || b < 0.0 || b > 1.0) throw ConfigError("bm25 parameters out of range");
    if (ndcg_k == 0) throw ConfigError("ndcg_k must be >= 1");
}

}  // namespace descgen::config
