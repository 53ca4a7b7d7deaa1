#pragma once
// Retrieval-style evaluation: Okapi BM25 alignment of generated text against
// the high-engagement reference descriptions, and rating-based NDCG@k over
// cohort rankings, aggregated into a serializable report.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "descgen/common.hpp"
#include "descgen/corpus.hpp"
#include "descgen/textmodel.hpp"

namespace descgen::evalsuite {

struct EmptyReferenceSet : EvalError {
    EmptyReferenceSet() : EvalError("bm25 index requires at least one document") {}
};
struct UnknownDoc : EvalError {
    explicit UnknownDoc(std::size_t id)
        : EvalError("unknown document id: " + std::to_string(id)) {}
};
struct EmptyRanking : EvalError {
    EmptyRanking() : EvalError("ndcg requires a non-empty ranking") {}
};
struct MissingRating : EvalError {
    std::string item_id;
    explicit MissingRating(std::string id)
        : EvalError("no rating for ranked item: " + id), item_id(std::move(id)) {}
};
struct InconsistentIds : EvalError {
    using EvalError::EvalError;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

// Okapi BM25 with idf(t) = ln((N - df + 0.5) / (df + 0.5) + 1), which is
// non-negative for every df <= N. Query terms are deduplicated.
class Bm25Index {
  public:
    static Bm25Index build(const std::vector<std::string>& docs, Bm25Params params = {}) {
        if (docs.empty()) throw EmptyReferenceSet();
        if (params.k1 < 0.0) throw ConfigError("bm25 k1 must be >= 0");
        if (params.b < 0.0 || params.b > 1.0) throw ConfigError("bm25 b must lie in [0,1]");
        Bm25Index index;
        index.params_ = params;
        index.doc_terms_.reserve(docs.size());
        double total_len = 0.0;
        for (const auto& doc : docs) {
            std::map<std::string, int> counts;
            std::size_t len = 0;
            for (const auto& tok : textmodel::tokenize(doc)) {
                ++counts[tok];
                ++len;
            }
            for (const auto& [term, _] : counts) index.df_[term] += 1;
            index.doc_lens_.push_back(static_cast<double>(len));
            total_len += static_cast<double>(len);
            index.doc_terms_.push_back(std::move(counts));
        }
        index.avgdl_ = total_len / static_cast<double>(docs.size());
        if (index.avgdl_ <= 0.0) index.avgdl_ = 1.0;  // all-empty reference set
        return index;
    }

    std::size_t doc_count() const { return doc_terms_.size(); }
    double avgdl() const { return avgdl_; }
    const Bm25Params& params() const { return params_; }

    int df(const std::string& term) const {
        auto it = df_.find(term);
        return it == df_.end() ? 0 : it->second;
    }

    double idf(const std::string& term) const {
        const double n = static_cast<double>(doc_count());
        const double d = static_cast<double>(df(term));
        return std::log((n - d + 0.5) / (d + 0.5) + 1.0);
    }

    double score(const std::string& query_text, std::size_t doc_id) const {
        if (doc_id >= doc_terms_.size()) throw UnknownDoc(doc_id);
        std::set<std::string> terms;
        for (const auto& tok : textmodel::tokenize(query_text)) terms.insert(tok);
        const auto& counts = doc_terms_[doc_id];
        const double dl = doc_lens_[doc_id];
        double total = 0.0;
        for (const auto& term : terms) {
            auto it = counts.find(term);
            if (it == counts.end()) continue;
            const double tf = static_cast<double>(it->second);
            const double denom =
                tf + params_.k1 * (1.0 - params_.b + params_.b * dl / avgdl_);
            total += idf(term) * tf * (params_.k1 + 1.0) / denom;
        }
        return total;
    }

  private:
    Bm25Params params_;
    std::vector<std::map<std::string, int>> doc_terms_;
    std::vector<double> doc_lens_;
    std::map<std::string, int> df_;
    double avgdl_ = 1.0;
};

// Reference index plus the item/category bookkeeping needed to score an
// enhancement against the right reference pool.
struct ReferenceIndex {
    Bm25Index index;
    std::vector<std::string> item_ids;
    std::vector<std::string> categories;
    std::map<std::string, std::vector<std::size_t>> by_category;

    static ReferenceIndex build(const std::vector<corpus::Item>& reference_items,
                                Bm25Params params = {}) {
        std::vector<std::string> docs;
        docs.reserve(reference_items.size());
        for (const auto& item : reference_items) docs.push_back(item.description);
        ReferenceIndex ref{Bm25Index::build(docs, params), {}, {}, {}};
        for (std::size_t i = 0; i < reference_items.size(); ++i) {
            ref.item_ids.push_back(reference_items[i].item_id);
            ref.categories.push_back(reference_items[i].category);
            if (!reference_items[i].category.empty())
                ref.by_category[reference_items[i].category].push_back(i);
        }
        return ref;
    }
};

// Max BM25 of the text against the references in the item's category, or
// against every reference when the item has no category (or its category is
// absent from the reference pool).
inline double item_alignment_score(const ReferenceIndex& ref, const std::string& text,
                                   const corpus::Item& item) {
    const std::vector<std::size_t>* candidates = nullptr;
    if (!item.category.empty()) {
        auto it = ref.by_category.find(item.category);
        if (it != ref.by_category.end()) candidates = &it->second;
    }
    double best = 0.0;
    if (candidates) {
        for (std::size_t id : *candidates) best = std::max(best, ref.index.score(text, id));
    } else {
        for (std::size_t id = 0; id < ref.index.doc_count(); ++id)
            best = std::max(best, ref.index.score(text, id));
    }
    return best;
}

struct RatingRecord {
    std::string item_id;
    std::string rater_id;
    int rating = 0;  // 1..5

    void validate() const {
        if (rating < 1 || rating > 5)
            throw DataError("rating must lie in 1..5 for item " + item_id);
    }
};

inline std::vector<RatingRecord> parse_ratings(const std::vector<std::string>& lines) {
    std::vector<RatingRecord> out;
    std::size_t line_no = 0;
    for (const auto& line : lines) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            RatingRecord r;
            r.item_id = j.at("item_id").get<std::string>();
            r.rater_id = j.at("rater_id").get<std::string>();
            r.rating = j.at("rating").get<int>();
            r.validate();
            out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("ratings line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

inline std::vector<RatingRecord> load_ratings(const std::filesystem::path& path) {
    return parse_ratings(read_lines(path));
}

// Multi-rater grade: mean rating rounded half-up to an integer.
inline std::map<std::string, int> grade_by_item(const std::vector<RatingRecord>& ratings) {
    std::map<std::string, std::pair<double, int>> acc;
    for (const auto& r : ratings) {
        r.validate();
        acc[r.item_id].first += r.rating;
        acc[r.item_id].second += 1;
    }
    std::map<std::string, int> grades;
    for (const auto& [id, sum_count] : acc)
        grades[id] = static_cast<int>(std::floor(sum_count.first / sum_count.second + 0.5));
    return grades;
}

// DCG with exponential gain (2^rel - 1) and log2(i + 1) discount; the ideal
// order re-sorts the same ranked items by grade.
inline double ndcg_at_k(const std::vector<std::string>& ranked_ids,
                        const std::vector<RatingRecord>& ratings, std::size_t k = 10) {
    if (ranked_ids.empty()) throw EmptyRanking();
    if (k == 0) throw ConfigError("ndcg k must be >= 1");
    auto grades = grade_by_item(ratings);
    std::vector<int> rels;
    rels.reserve(ranked_ids.size());
    for (const auto& id : ranked_ids) {
        auto it = grades.find(id);
        if (it == grades.end()) throw MissingRating(id);
        rels.push_back(it->second);
    }
    const std::size_t depth = std::min(k, rels.size());
    auto dcg = [&](const std::vector<int>& order) {
        double total = 0.0;
        for (std::size_t i = 0; i < depth; ++i) {
            const double gain = std::pow(2.0, order[i]) - 1.0;
            total += gain / std::log2(static_cast<double>(i) + 2.0);
        }
        return total;
    };
    const double actual = dcg(rels);
    std::vector<int> ideal = rels;
    std::sort(ideal.begin(), ideal.end(), std::greater<int>());
    const double best = dcg(ideal);
    return best == 0.0 ? 1.0 : actual / best;
}

struct CohortStats {
    std::string name;
    std::vector<std::pair<std::string, double>> per_item_bm25;  // sorted by item_id
    double mean_bm25 = 0.0;
    std::optional<double> ndcg;
    std::string ndcg_note;  // reason when ndcg is absent
    std::size_t count = 0;

    void finalize() {
        std::sort(per_item_bm25.begin(), per_item_bm25.end());
        count = per_item_bm25.size();
        double total = 0.0;
        for (const auto& [_, s] : per_item_bm25) total += s;
        mean_bm25 = count == 0 ? 0.0 : total / static_cast<double>(count);
    }
};

struct EvalReport {
    int version = 1;
    double lambda = 0.0;
    std::string manifest_hash;
    std::string config_hash;
    double k1 = 1.2;
    double b = 0.75;
    std::size_t ndcg_k = 10;
    CohortStats reference_top;
    CohortStats original_bottom;
    CohortStats enhanced;

    const CohortStats& cohort(std::size_t i) const {
        switch (i) {
            case 0: return reference_top;
            case 1: return original_bottom;
            default: return enhanced;
        }
    }
};

// ---- report serialization ----------------------------------------------
// A versioned sectioned key=value document. Doubles print with %.17g so a
// parse-serialize round trip is bit-exact.

inline std::string serialize_report(const EvalReport& r) {
    std::string out = "descgen-report v" + std::to_string(r.version) + "\n";
    out += "[meta]\n";
    out += "lambda=" + format_double(r.lambda) + "\n";
    out += "manifest_hash=" + r.manifest_hash + "\n";
    out += "config_hash=" + r.config_hash + "\n";
    out += "k1=" + format_double(r.k1) + "\n";
    out += "b=" + format_double(r.b) + "\n";
    out += "ndcg_k=" + std::to_string(r.ndcg_k) + "\n";
    for (std::size_t i = 0; i < 3; ++i) {
        const CohortStats& c = r.cohort(i);
        out += "[cohort " + c.name + "]\n";
        out += "count=" + std::to_string(c.count) + "\n";
        out += "mean_bm25=" + format_double(c.mean_bm25) + "\n";
        if (c.ndcg)
            out += "ndcg=" + format_double(*c.ndcg) + "\n";
        else
            out += "ndcg_note=" + (c.ndcg_note.empty() ? std::string("not computed") : c.ndcg_note) +
                   "\n";
        for (const auto& [id, score] : c.per_item_bm25)
            out += "item " + id + " " + format_double(score) + "\n";
    }
    return out;
}

inline EvalReport parse_report(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string::npos) nl = text.size();
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    if (lines.empty() || lines[0] != "descgen-report v1")
        throw EvalError("unrecognized report header");
    EvalReport r;
    CohortStats* cohort = nullptr;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line == "[meta]") {
                cohort = nullptr;
            } else if (line.rfind("[cohort ", 0) == 0 && line.back() == ']') {
                const std::string name = line.substr(8, line.size() - 9);
                if (name == "reference_top")
                    cohort = &r.reference_top;
                else if (name == "original_bottom")
                    cohort = &r.original_bottom;
                else if (name == "enhanced")
                    cohort = &r.enhanced;
                else
                    throw EvalError("unknown cohort in report: " + name);
                cohort->name = name;
            } else {
                throw EvalError("unrecognized report section: " + line);
            }
            continue;
        }
        if (line.rfind("item ", 0) == 0) {
            if (!cohort) throw EvalError("item line outside a cohort section");
            auto space = line.rfind(' ');
            cohort->per_item_bm25.emplace_back(line.substr(5, space - 5),
                                               parse_double(line.substr(space + 1)));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw EvalError("unrecognized report line: " + line);
        const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        if (!cohort) {
            if (key == "lambda") r.lambda = parse_double(value);
            else if (key == "manifest_hash") r.manifest_hash = value;
            else if (key == "config_hash") r.config_hash = value;
            else if (key == "k1") r.k1 = parse_double(value);
            else if (key == "b") r.b = parse_double(value);
            else if (key == "ndcg_k") r.ndcg_k = static_cast<std::size_t>(std::stoull(value));
            else throw EvalError("unknown report key: " + key);
        } else {
            if (key == "count") cohort->count = static_cast<std::size_t>(std::stoull(value));
            else if (key == "mean_bm25") cohort->mean_bm25 = parse_double(value);
            else if (key == "ndcg") cohort->ndcg = parse_double(value);
            else if (key == "ndcg_note") cohort->ndcg_note = value;
            else throw EvalError("unknown cohort key: " + key);
        }
    }
    return r;
}

inline EvalReport load_report(const std::filesystem::path& path) {
    try {
        return parse_report(read_file(path));
    } catch (const DataError& e) {
        throw EvalError(e.what());
    }
}

// Flat per-item CSV for external plotting.
inline std::string report_csv(const EvalReport& r) {
    std::string out = "# config_hash=" + r.config_hash + "\n";
    out += "cohort,item_id,bm25\n";
    for (std::size_t i = 0; i < 3; ++i) {
        const CohortStats& c = r.cohort(i);
        for (const auto& [id, score] : c.per_item_bm25)
            out += c.name + "," + id + "," + format_double(score) + "\n";
    }
    return out;
}

}  // namespace descgen::evalsuite
