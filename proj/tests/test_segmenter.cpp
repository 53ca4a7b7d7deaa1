#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "descgen/rng.hpp"
#include "descgen/segmenter.hpp"

using namespace descgen;
using namespace descgen::segmenter;

namespace {

const std::string kJeggingsOriginal =
    "Get in on a cool-casual style with Terra & Sky's Jeggings for Women. "
    "Material: 61% Cotton/24% Polyester/14% Rayon/1% Spandex. Care: Machine washable. "
    "Country of Origin: Imported. "
    "Size: Model is 5'11\" and is wearing a size 1X. Fit: Skinny fit. "
    "Rise and Inseam: High rise; 28\" inseam. "
    "The inner elasticized waist and stretch denim fabric provide a comfortable fit. "
    "Only at Walmart. "
    "Pair these with your favorite graphic tee. "
    "Women's Plus Size Jeans from Terra & Sky";

bool any_span_contains(const std::vector<Span>& spans, const std::string& needle) {
    for (const auto& s : spans)
        if (s.text.find(needle) != std::string::npos) return true;
    return false;
}

}  // namespace

TEST_CASE("sentence splitting", "[segmenter]") {
    SECTION("terminators and trailing fragment") {
        auto s = split_sentences("One. Two! Three? Four");
        REQUIRE(s.size() == 4);
        CHECK(s[0] == "One.");
        CHECK(s[3] == "Four");
    }
    SECTION("decimal points do not terminate") {
        auto s = split_sentences("Weighs 5.5 oz. Nice.");
        REQUIRE(s.size() == 2);
        CHECK(s[0] == "Weighs 5.5 oz.");
    }
    SECTION("key-value runs split on semicolons") {
        auto s = split_sentences("Rise and Inseam: High rise; 28\" inseam.");
        REQUIRE(s.size() == 2);
        CHECK(s[0] == "Rise and Inseam: High rise");
        CHECK(s[1] == "28\" inseam.");
    }
    SECTION("semicolons without a colon stay together") {
        auto s = split_sentences("good; bad");
        REQUIRE(s.size() == 1);
    }
    SECTION("empty input") {
        CHECK(split_sentences("").empty());
        CHECK(split_sentences("   ").empty());
    }
}

TEST_CASE("default rules route the jeggings description", "[segmenter]") {
    auto rules = AspectRuleSet::defaults();
    auto bundle = segment(kJeggingsOriginal, rules);

    SECTION("dimensions capture the inseam clause") {
        CHECK(any_span_contains(bundle.of(Aspect::kProductDimensions), "28\" inseam"));
        CHECK(any_span_contains(bundle.of(Aspect::kProductDimensions), "Size: Model"));
    }
    SECTION("brand guarantees capture the exclusivity line") {
        CHECK(any_span_contains(bundle.of(Aspect::kBrandGuarantees), "Only at Walmart"));
    }
    SECTION("factual information captures materials and care") {
        CHECK(any_span_contains(bundle.of(Aspect::kFactualInformation), "61% Cotton"));
        CHECK(any_span_contains(bundle.of(Aspect::kFactualInformation), "Machine washable"));
    }
    SECTION("unique attributes capture the waist feature") {
        CHECK(any_span_contains(bundle.of(Aspect::kUniqueAttributes), "elasticized waist"));
    }
    SECTION("appeal captured by lexicon density") {
        CHECK(any_span_contains(bundle.of(Aspect::kLanguageAppeal), "cool-casual"));
    }
    SECTION("extra rows go to residual, not their own aspect") {
        CHECK(any_span_contains(bundle.residual, "graphic tee"));
        CHECK(any_span_contains(bundle.residual, "Plus Size Jeans"));
    }
    SECTION("all five aspects present") {
        auto cov = coverage_vector(bundle);
        CHECK(cov == std::array<int, 5>{1, 1, 1, 1, 1});
    }
}

TEST_CASE("single-sentence routing", "[segmenter]") {
    auto rules = AspectRuleSet::defaults();
    auto only = segment("Only at Walmart.", rules);
    REQUIRE(only.of(Aspect::kBrandGuarantees).size() == 1);
    CHECK(only.of(Aspect::kBrandGuarantees)[0].text == "Only at Walmart.");
    CHECK(only.span_count() == 1);
}

TEST_CASE("empty description yields an empty bundle", "[segmenter]") {
    auto rules = AspectRuleSet::defaults();
    auto bundle = segment("", rules);
    CHECK(bundle.sentence_count == 0);
    CHECK(bundle.span_count() == 0);
    CHECK(coverage_vector(bundle) == std::array<int, 5>{0, 0, 0, 0, 0});
}

TEST_CASE("coverage vector flags exactly the non-empty aspects", "[segmenter]") {
    auto rules = AspectRuleSet::defaults();
    auto bundle = segment("Lifetime warranty.", rules);
    CHECK(coverage_vector(bundle) == std::array<int, 5>{0, 0, 0, 0, 1});
}

TEST_CASE("higher priority wins across aspects", "[segmenter]") {
    AspectRuleSet rs;
    rs.appeal_lexicon = AspectRuleSet::default_lexicon();
    for (Aspect a : kAspects)
        rs.rules[static_cast<std::size_t>(a)].push_back(Rule::make(1, "zzznever"));
    rs.rules[static_cast<std::size_t>(Aspect::kFactualInformation)].push_back(
        Rule::make(10, "gadget"));
    rs.rules[static_cast<std::size_t>(Aspect::kBrandGuarantees)].push_back(
        Rule::make(20, "gadget"));
    auto bundle = segment("A gadget.", rs);
    CHECK(bundle.of(Aspect::kBrandGuarantees).size() == 1);
    CHECK(bundle.of(Aspect::kFactualInformation).empty());

    // flip the priorities and the routing flips
    rs.rules[static_cast<std::size_t>(Aspect::kFactualInformation)].back().priority = 30;
    auto bundle2 = segment("A gadget.", rs);
    CHECK(bundle2.of(Aspect::kFactualInformation).size() == 1);
}

TEST_CASE("rule set validation", "[segmenter]") {
    AspectRuleSet rs;
    CHECK_THROWS_AS(rs.validate(), DataError);  // empty per-aspect lists
    for (Aspect a : kAspects)
        rs.rules[static_cast<std::size_t>(a)].push_back(Rule::make(1, "x"));
    CHECK_NOTHROW(rs.validate());
    rs.rules[0].push_back(Rule::make(1, "y"));  // duplicate priority within aspect
    CHECK_THROWS_AS(rs.validate(), DataError);
}

TEST_CASE("rule file parsing", "[segmenter]") {
    auto rs = AspectRuleSet::parse({"# comment", "", "brand_guarantees\t5\t\\bwarranty\\b",
                                    "language_appeal\t1\tchic", "factual_information\t2\tmaterial",
                                    "product_dimensions\t3\tsize", "unique_attributes\t4\tunique"});
    CHECK(rs.rules[static_cast<std::size_t>(Aspect::kBrandGuarantees)].size() == 1);
    CHECK_THROWS_AS(AspectRuleSet::parse({"no tabs here"}), DataError);
    CHECK_THROWS_AS(AspectRuleSet::parse({"bogus_aspect\t1\tx"}), DataError);
}

TEST_CASE("conservation and determinism over fuzzed descriptions", "[segmenter][property]") {
    auto rules = AspectRuleSet::defaults();
    Rng rng(99);
    const std::vector<std::string> words = {"soft",    "cotton", "warranty", "28\"",  "size",
                                            "unique",  "chic",   "hello",    "world", "material:",
                                            "only at", "5.5",    "inseam",   "care:", "plush"};
    const std::vector<std::string> puncts = {". ", "! ", "? ", "; ", " ", ": "};
    for (int iter = 0; iter < 100; ++iter) {
        std::string text;
        std::size_t len = rng.next_below(60);
        for (std::size_t i = 0; i < len; ++i) {
            text += words[rng.next_below(words.size())];
            text += puncts[rng.next_below(puncts.size())];
        }
        auto bundle = segment(text, rules);
        auto sentences = split_sentences(text);

        // conservation: every sentence lands in exactly one bucket
        CHECK(bundle.span_count() == sentences.size());
        std::map<std::size_t, std::string> by_index;
        for (const auto& list : bundle.segments)
            for (const auto& span : list) by_index[span.index] = span.text;
        for (const auto& span : bundle.residual) by_index[span.index] = span.text;
        REQUIRE(by_index.size() == sentences.size());
        for (std::size_t i = 0; i < sentences.size(); ++i) CHECK(by_index[i] == sentences[i]);

        // determinism: re-running is identical
        auto again = segment(text, rules);
        CHECK(again.span_count() == bundle.span_count());
        for (std::size_t a = 0; a < kAspectCount; ++a) {
            REQUIRE(again.segments[a].size() == bundle.segments[a].size());
            for (std::size_t i = 0; i < again.segments[a].size(); ++i)
                CHECK(again.segments[a][i].text == bundle.segments[a][i].text);
        }
    }
}
