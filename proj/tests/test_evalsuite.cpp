#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "descgen/evalsuite.hpp"
#include "descgen/rng.hpp"
#include "support/ir_oracles.hpp"

using namespace descgen;
using namespace descgen::evalsuite;

namespace {

std::vector<std::string> toy_docs() {
    return {
        "the quick brown fox jumps over the lazy dog",
        "a quick brown dog runs through the green field",
        "red cotton shirt with a soft finish",
        "blue denim jeans with a high rise and 28 inch inseam",
        "red shirt",
    };
}

std::vector<RatingRecord> ratings_of(const std::vector<std::pair<std::string, int>>& grades) {
    std::vector<RatingRecord> out;
    for (const auto& [id, grade] : grades) out.push_back({id, "r1", grade});
    return out;
}

}  // namespace

TEST_CASE("index statistics", "[evalsuite]") {
    SECTION("single doc") {
        auto index = Bm25Index::build({"red shirt"});
        CHECK(index.doc_count() == 1);
        CHECK(index.avgdl() == 2.0);
        CHECK(index.df("red") == 1);
        CHECK(index.df("absent") == 0);
    }
    SECTION("identical docs double the df") {
        auto index = Bm25Index::build({"red shirt", "red shirt"});
        CHECK(index.df("red") == 2);
        CHECK(index.df("shirt") == 2);
    }
    SECTION("empty reference set rejected") {
        CHECK_THROWS_AS(Bm25Index::build({}), EmptyReferenceSet);
    }
    SECTION("parameter validation") {
        CHECK_THROWS_AS(Bm25Index::build({"x"}, Bm25Params{-1.0, 0.75}), ConfigError);
        CHECK_THROWS_AS(Bm25Index::build({"x"}, Bm25Params{1.2, 1.5}), ConfigError);
    }
}

TEST_CASE("bm25 hand-computed single-doc score", "[evalsuite]") {
    auto index = Bm25Index::build({"red shirt"});
    // idf = ln(0.5/1.5 + 1) = ln(4/3); tf term = 1 * 2.2 / (1 + 1.2) = 1
    const double expected = std::log(4.0 / 3.0);
    CHECK(index.score("red", 0) == Catch::Approx(expected).margin(1e-12));
    CHECK(expected == Catch::Approx(0.287682).margin(1e-6));
}

TEST_CASE("bm25 matches the brute-force oracle on a 5-doc corpus", "[evalsuite][oracle]") {
    auto docs = toy_docs();
    auto index = Bm25Index::build(docs);
    testsupport::Bm25Oracle oracle{docs, 1.2, 0.75};
    const std::vector<std::string> queries = {
        "red shirt", "quick brown dog", "inseam", "the lazy fox", "green red blue",
        "soft cotton shirt finish", "dog dog dog", "nothing matches here kumquat",
    };
    for (const auto& q : queries)
        for (std::size_t d = 0; d < docs.size(); ++d)
            CHECK(index.score(q, d) == Catch::Approx(oracle.score(q, d)).margin(1e-9));
}

TEST_CASE("bm25 basic properties", "[evalsuite][property]") {
    auto docs = toy_docs();
    auto index = Bm25Index::build(docs);

    SECTION("disjoint vocabulary scores zero") {
        for (std::size_t d = 0; d < docs.size(); ++d)
            CHECK(index.score("zzz qqq www", d) == 0.0);
        CHECK(index.score("", 0) == 0.0);
    }
    SECTION("scores are non-negative") {
        Rng rng(17);
        const std::vector<std::string> vocab = {"red", "dog", "the", "inseam", "soft", "zzz"};
        for (int iter = 0; iter < 200; ++iter) {
            std::string q;
            for (std::size_t i = 0; i < 1 + rng.next_below(4); ++i)
                q += vocab[rng.next_below(vocab.size())] + " ";
            CHECK(index.score(q, rng.next_below(docs.size())) >= 0.0);
        }
    }
    SECTION("idf never increases with df") {
        // df in this corpus: "red" 2, "the" 2, "dog" 2, "quick" 2, "inseam" 1
        for (const auto& term : {"red", "the", "dog", "quick", "inseam", "shirt"}) {
            const int df = index.df(term);
            for (const auto& other : {"red", "the", "dog", "quick", "inseam", "shirt"}) {
                if (index.df(other) >= df) CHECK(index.idf(other) <= index.idf(term) + 1e-15);
            }
        }
    }
    SECTION("doubling k1 at tf=1 and dl=avgdl leaves the score unchanged") {
        auto uniform = Bm25Index::build({"red shirt", "blue jeans"});  // dl == avgdl == 2
        auto doubled = Bm25Index::build({"red shirt", "blue jeans"}, Bm25Params{2.4, 0.75});
        CHECK(uniform.score("red", 0) == Catch::Approx(doubled.score("red", 0)).margin(1e-12));
    }
    SECTION("unknown doc id") {
        CHECK_THROWS_AS(index.score("red", 99), UnknownDoc);
    }
}

TEST_CASE("item alignment picks the category pool", "[evalsuite]") {
    std::vector<corpus::Item> refs(3);
    refs[0] = {"r1", "t", "soft red cotton shirt", 1, 2, "apparel"};
    refs[1] = {"r2", "t", "sturdy oak kitchen table", 1, 2, "furniture"};
    refs[2] = {"r3", "t", "red oak shelf", 1, 2, "furniture"};
    auto ref = ReferenceIndex::build(refs);

    corpus::Item apparel_item{"x", "t", "", 0, 1, "apparel"};
    corpus::Item furniture_item{"y", "t", "", 0, 1, "furniture"};
    corpus::Item uncategorized{"z", "t", "", 0, 1, ""};

    // "red oak" matches r3 best, but the apparel pool only holds r1
    const double in_apparel = item_alignment_score(ref, "red oak", apparel_item);
    const double in_furniture = item_alignment_score(ref, "red oak", furniture_item);
    const double global = item_alignment_score(ref, "red oak", uncategorized);
    CHECK(in_furniture > in_apparel);
    CHECK(global == Catch::Approx(in_furniture));

    // unknown category falls back to the global pool
    corpus::Item other{"w", "t", "", 0, 1, "garden"};
    CHECK(item_alignment_score(ref, "red oak", other) == Catch::Approx(global));

    // self-alignment dominates token subsets
    const double self_score = item_alignment_score(ref, refs[0].description, apparel_item);
    const double subset = item_alignment_score(ref, "soft red cotton", apparel_item);
    CHECK(self_score >= subset);
    CHECK(item_alignment_score(ref, "kumquat zzz", apparel_item) == 0.0);
}

TEST_CASE("ndcg hand-computed example", "[evalsuite][oracle]") {
    // grades [3,4,5] presented worst-first
    auto ratings = ratings_of({{"a", 3}, {"b", 4}, {"c", 5}});
    const double got = ndcg_at_k({"a", "b", "c"}, ratings, 10);
    const double dcg = 7.0 / 1.0 + 15.0 / std::log2(3.0) + 31.0 / 2.0;
    const double idcg = 31.0 / 1.0 + 15.0 / std::log2(3.0) + 7.0 / 2.0;
    CHECK(dcg == Catch::Approx(31.9639).margin(1e-4));
    CHECK(idcg == Catch::Approx(43.9639).margin(1e-4));
    CHECK(got == Catch::Approx(dcg / idcg).margin(1e-12));
    CHECK(got == Catch::Approx(0.7270).margin(1e-3));
}

TEST_CASE("ndcg edge behaviour", "[evalsuite]") {
    SECTION("ideal order scores 1") {
        auto ratings = ratings_of({{"a", 5}, {"b", 4}, {"c", 3}});
        CHECK(ndcg_at_k({"a", "b", "c"}, ratings, 10) == 1.0);
    }
    SECTION("uniform grades score 1 for any order") {
        auto ratings = ratings_of({{"a", 3}, {"b", 3}, {"c", 3}});
        CHECK(ndcg_at_k({"b", "c", "a"}, ratings, 10) == Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("items beyond k are ignored") {
        auto ratings = ratings_of({{"a", 5}, {"b", 4}, {"c", 1}, {"d", 1}});
        CHECK(ndcg_at_k({"a", "b", "c", "d"}, ratings, 2) ==
              Catch::Approx(ndcg_at_k({"a", "b", "d", "c"}, ratings, 2)).margin(1e-15));
    }
    SECTION("multi-rater grades average then round half-up") {
        std::vector<RatingRecord> ratings = {{"a", "r1", 3}, {"a", "r2", 4},   // mean 3.5 -> 4
                                             {"b", "r1", 3}, {"b", "r2", 3}};  // 3
        auto grades = grade_by_item(ratings);
        CHECK(grades["a"] == 4);
        CHECK(grades["b"] == 3);
    }
    SECTION("errors") {
        auto ratings = ratings_of({{"a", 5}});
        CHECK_THROWS_AS(ndcg_at_k({}, ratings, 10), EmptyRanking);
        CHECK_THROWS_AS(ndcg_at_k({"missing"}, ratings, 10), MissingRating);
        CHECK_THROWS_AS(parse_ratings({R"({"item_id":"a","rater_id":"r","rating":9})"}), DataError);
    }
}

TEST_CASE("ndcg bounds and swap property over random rankings", "[evalsuite][property]") {
    Rng rng(2025);
    for (int iter = 0; iter < 1000; ++iter) {
        const std::size_t n = 2 + rng.next_below(10);
        std::vector<std::string> ids;
        std::vector<RatingRecord> ratings;
        std::vector<int> rels;
        for (std::size_t i = 0; i < n; ++i) {
            ids.push_back("i" + std::to_string(i));
            const int grade = 1 + static_cast<int>(rng.next_below(5));
            ratings.push_back({ids.back(), "r", grade});
            rels.push_back(grade);
        }
        rng.shuffle(ids);
        const std::size_t k = 1 + rng.next_below(n);

        // matches the independent oracle and stays inside [0,1]
        std::vector<int> presented;
        auto grades = grade_by_item(ratings);
        for (const auto& id : ids) presented.push_back(grades[id]);
        const double got = ndcg_at_k(ids, ratings, k);
        CHECK(got == Catch::Approx(testsupport::ndcg_oracle(presented, k)).margin(1e-12));
        CHECK(got >= 0.0);
        CHECK(got <= 1.0 + 1e-12);

        // moving a higher-graded item earlier never hurts
        std::size_t i = rng.next_below(n), j = rng.next_below(n);
        if (i > j) std::swap(i, j);
        if (i == j || presented[j] <= presented[i]) continue;
        std::vector<std::string> swapped = ids;
        std::swap(swapped[i], swapped[j]);
        CHECK(ndcg_at_k(swapped, ratings, k) >= got - 1e-12);
    }
}

TEST_CASE("report serialization round-trips bit-exactly", "[evalsuite]") {
    EvalReport r;
    r.lambda = 0.429;
    r.manifest_hash = "0123456789abcdef";
    r.config_hash = "fedcba9876543210";
    r.ndcg_k = 10;
    r.reference_top.name = "reference_top";
    r.reference_top.per_item_bm25 = {{"a", 1.0 / 3.0}, {"b", 2.7182818284590451}};
    r.reference_top.ndcg = 0.9137218478235912;
    r.reference_top.finalize();
    r.original_bottom.name = "original_bottom";
    r.original_bottom.per_item_bm25 = {{"c", 0.1}};
    r.original_bottom.ndcg_note = "ratings file missing ids";
    r.original_bottom.finalize();
    r.enhanced.name = "enhanced";
    r.enhanced.per_item_bm25 = {{"c", 5.5511151231257827e-17}};
    r.enhanced.ndcg = 1.0;
    r.enhanced.finalize();

    const std::string text = serialize_report(r);
    EvalReport back = parse_report(text);
    CHECK(serialize_report(back) == text);
    CHECK(back.lambda == r.lambda);
    CHECK(back.enhanced.per_item_bm25[0].second == r.enhanced.per_item_bm25[0].second);
    CHECK(back.original_bottom.ndcg.has_value() == false);

    // cohort means equal independent recomputation from the item lines
    double total = 0.0;
    for (const auto& [_, s] : back.reference_top.per_item_bm25) total += s;
    CHECK(std::abs(back.reference_top.mean_bm25 - total / 2.0) <= 1e-12);

    CHECK_THROWS_AS(parse_report("garbage"), EvalError);
}
