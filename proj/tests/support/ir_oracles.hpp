#pragma once
// Brute-force retrieval oracles used by the tests. They implement the scoring
// formulas directly from raw documents, independent of the indexed paths in
// the library.

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "descgen/textmodel.hpp"

namespace descgen::testsupport {

struct Bm25Oracle {
    std::vector<std::string> docs;
    double k1 = 1.2;
    double b = 0.75;

    double idf(const std::string& term) const {
        double df = 0.0;
        for (const auto& doc : docs) {
            for (const auto& tok : textmodel::tokenize(doc))
                if (tok == term) {
                    df += 1.0;
                    break;
                }
        }
        const double n = static_cast<double>(docs.size());
        return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
    }

    double score(const std::string& query, std::size_t doc_id) const {
        double avgdl = 0.0;
        for (const auto& doc : docs)
            avgdl += static_cast<double>(textmodel::tokenize(doc).size());
        avgdl /= static_cast<double>(docs.size());
        if (avgdl <= 0.0) avgdl = 1.0;

        const auto doc_tokens = textmodel::tokenize(docs[doc_id]);
        const double dl = static_cast<double>(doc_tokens.size());
        std::set<std::string> qterms;
        for (const auto& tok : textmodel::tokenize(query)) qterms.insert(tok);

        double total = 0.0;
        for (const auto& term : qterms) {
            double tf = 0.0;
            for (const auto& tok : doc_tokens)
                if (tok == term) tf += 1.0;
            if (tf == 0.0) continue;
            total += idf(term) * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl));
        }
        return total;
    }
};

// Direct DCG/NDCG from the formula, no shared code with the library path.
inline double dcg_oracle(const std::vector<int>& rels, std::size_t k) {
    double total = 0.0;
    for (std::size_t i = 0; i < std::min(k, rels.size()); ++i)
        total += (std::pow(2.0, rels[i]) - 1.0) / (std::log(static_cast<double>(i) + 2.0) / std::log(2.0));
    return total;
}

inline double ndcg_oracle(const std::vector<int>& rels, std::size_t k) {
    std::vector<int> ideal = rels;
    std::sort(ideal.begin(), ideal.end(), [](int a, int b) { return a > b; });
    const double best = dcg_oracle(ideal, k);
    return best == 0.0 ? 1.0 : dcg_oracle(rels, k) / best;
}

}  // namespace descgen::testsupport
