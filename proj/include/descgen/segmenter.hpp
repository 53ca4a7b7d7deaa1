#pragma once
// Rule-based decomposition of a product description into five aspects.
// A description is split into sentences (and "Key: value" clauses), then each
// sentence goes to the aspect whose matching rule has the highest priority.
// Sentences matching nothing fall back to a language-appeal density check and
// otherwise land in the residual bucket, so no text is ever lost.

#include <array>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "descgen/common.hpp"
#include "descgen/textmodel.hpp"

namespace descgen::segmenter {

enum class Aspect {
    kLanguageAppeal = 0,
    kFactualInformation = 1,
    kProductDimensions = 2,
    kUniqueAttributes = 3,
    kBrandGuarantees = 4,
};

inline constexpr std::size_t kAspectCount = 5;

inline constexpr std::array<Aspect, kAspectCount> kAspects = {
    Aspect::kLanguageAppeal, Aspect::kFactualInformation, Aspect::kProductDimensions,
    Aspect::kUniqueAttributes, Aspect::kBrandGuarantees};

inline const char* aspect_name(Aspect a) {
    switch (a) {
        case Aspect::kLanguageAppeal: return "language_appeal";
        case Aspect::kFactualInformation: return "factual_information";
        case Aspect::kProductDimensions: return "product_dimensions";
        case Aspect::kUniqueAttributes: return "unique_attributes";
        case Aspect::kBrandGuarantees: return "brand_guarantees";
    }
    return "?";
}

inline Aspect aspect_from_name(std::string_view name) {
    for (Aspect a : kAspects)
        if (name == aspect_name(a)) return a;
    throw DataError("unknown aspect kind: " + std::string(name));
}

// Control token prepended to training/generation sequences for an aspect.
inline std::string aspect_control_token(Aspect a) {
    return std::string("<aspect_") + aspect_name(a) + ">";
}

inline std::vector<std::string> aspect_control_tokens() {
    std::vector<std::string> toks;
    for (Aspect a : kAspects) toks.push_back(aspect_control_token(a));
    return toks;
}

struct Rule {
    int priority = 0;
    std::string pattern;  // ECMAScript regex, matched case-insensitively
    std::regex re;

    static Rule make(int priority, std::string pattern) {
        Rule r;
        r.priority = priority;
        r.re = std::regex(pattern, std::regex::ECMAScript | std::regex::icase);
        r.pattern = std::move(pattern);
        return r;
    }
};

struct Span {
    std::string text;
    std::size_t index = 0;  // position in the sentence stream
};

struct AspectBundle {
    std::array<std::vector<Span>, kAspectCount> segments;
    std::vector<Span> residual;
    std::size_t sentence_count = 0;

    const std::vector<Span>& of(Aspect a) const {
        return segments[static_cast<std::size_t>(a)];
    }
    std::size_t span_count() const {
        std::size_t n = residual.size();
        for (const auto& s : segments) n += s.size();
        return n;
    }
    std::string joined(Aspect a) const {
        std::string out;
        for (const auto& span : of(a)) {
            if (!out.empty()) out.push_back(' ');
            out += span.text;
        }
        return out;
    }
};

// Built-in rules; data/rules.tsv carries the same text and tests pin the two
// together. Format: aspect_kind <TAB> priority <TAB> pattern.
inline constexpr const char* kDefaultRulesTsv =
    "# default aspect segmentation rules\n"
    "# aspect_kind\tpriority\tpattern\n"
    "product_dimensions\t530\t\\bsize\\s*:\n"
    "product_dimensions\t529\t\\bsize\\s+\\d\n"
    "product_dimensions\t528\t\\d\\s*[\"\xE2\x80\x9D]\n"
    "product_dimensions\t527\t\\binseam\\b\n"
    "product_dimensions\t526\t\\brise\\b\n"
    "product_dimensions\t525\t\\d+\\s*(inch(es)?|cm|mm|ft|feet|lbs?|pounds?|oz|ounces?|kg|kilograms?|grams?)\\b\n"
    "product_dimensions\t524\t\\b(width|height|depth|length|weight)\\s*:\n"
    "product_dimensions\t523\t\\bdimensions?\\b\n"
    "product_dimensions\t522\t\\bfit\\s*:\n"
    "factual_information\t430\t\\bmaterial\\b\n"
    "factual_information\t429\t\\d+\\s*%\n"
    "factual_information\t428\t\\bcare\\s*:\n"
    "factual_information\t427\t\\bcountry of origin\\b\n"
    "factual_information\t426\t\\bmachine washable\\b\n"
    "factual_information\t425\t\\bspecifications?\\b\n"
    "factual_information\t424\t\\bmade (of|from|with)\\b\n"
    "factual_information\t423\t\\bimported\\b\n"
    "brand_guarantees\t330\t\\bwarrant(y|ies)\\b\n"
    "brand_guarantees\t329\t\\bguarantee\n"
    "brand_guarantees\t328\t\\bonly at\\b\n"
    "brand_guarantees\t327\t\\bexclusive(ly)?\\s+(at|to|from)\\b\n"
    "brand_guarantees\t326\t\\bofficially licensed\\b\n"
    "unique_attributes\t230\t\\bunique\\b\n"
    "unique_attributes\t229\t\\bexclusive\\b\n"
    "unique_attributes\t228\t\\bpatented\\b\n"
    "unique_attributes\t227\t\\bprovides?\\b\n"
    "unique_attributes\t226\t\\bfeatures?\\b\n"
    "unique_attributes\t225\t\\bstands? out\\b\n"
    "unique_attributes\t224\t\\bone[- ]of[- ]a[- ]kind\\b\n"
    "unique_attributes\t223\t\\bdesigned (for|to)\\b\n"
    "language_appeal\t130\t\\bchic\\b\n"
    "language_appeal\t129\t\\bstylish\\b\n"
    "language_appeal\t128\t\\belegan(t|ce)\\b\n"
    "language_appeal\t127\t\\beffortless\n"
    "language_appeal\t126\t\\bdazzling\\b\n";

inline constexpr const char* kDefaultAppealLexicon =
    "appealing attractive beautiful bold breathable casual charming chic classic comfortable "
    "comfy cool cozy dazzling delightful elegant effortless effortlessly fabulous fashionable "
    "flattering fresh glam gorgeous lovely luxurious modern perfect plush premium refined sleek "
    "smooth soft stunning stylish timeless trendy versatile vibrant warm";

class AspectRuleSet {
  public:
    std::array<std::vector<Rule>, kAspectCount> rules;
    std::set<std::string> appeal_lexicon;
    int min_appeal_hits = 2;

    static AspectRuleSet parse(const std::vector<std::string>& lines) {
        AspectRuleSet rs;
        rs.appeal_lexicon = default_lexicon();
        std::size_t line_no = 0;
        for (const auto& raw : lines) {
            ++line_no;
            std::string line = trim(raw);
            if (line.empty() || line[0] == '#') continue;
            auto tab1 = line.find('\t');
            auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
            if (tab2 == std::string::npos)
                throw DataError("rules line " + std::to_string(line_no) +
                                ": expected aspect<TAB>priority<TAB>pattern");
            Aspect aspect = aspect_from_name(line.substr(0, tab1));
            int priority = 0;
            try {
                priority = std::stoi(line.substr(tab1 + 1, tab2 - tab1 - 1));
            } catch (const std::exception&) {
                throw DataError("rules line " + std::to_string(line_no) + ": bad priority");
            }
            std::string pattern = line.substr(tab2 + 1);
            try {
                rs.rules[static_cast<std::size_t>(aspect)].push_back(Rule::make(priority, pattern));
            } catch (const std::regex_error& e) {
                throw DataError("rules line " + std::to_string(line_no) + ": bad pattern: " +
                                e.what());
            }
        }
        rs.validate();
        return rs;
    }

    static AspectRuleSet defaults() {
        std::vector<std::string> lines;
        std::string text = kDefaultRulesTsv;
        std::size_t start = 0;
        while (start < text.size()) {
            auto nl = text.find('\n', start);
            if (nl == std::string::npos) nl = text.size();
            lines.push_back(text.substr(start, nl - start));
            start = nl + 1;
        }
        return parse(lines);
    }

    static AspectRuleSet load(const std::filesystem::path& path) {
        return parse(read_lines(path));
    }

    static std::set<std::string> default_lexicon() {
        std::set<std::string> lex;
        for (const auto& tok : textmodel::tokenize(kDefaultAppealLexicon)) lex.insert(tok);
        return lex;
    }

    void load_lexicon(const std::filesystem::path& path) {
        appeal_lexicon.clear();
        for (const auto& line : read_lines(path))
            for (const auto& tok : textmodel::tokenize(line)) appeal_lexicon.insert(tok);
        if (appeal_lexicon.empty()) throw DataError("appeal lexicon is empty: " + path.string());
    }

    void validate() const {
        for (Aspect a : kAspects) {
            const auto& list = rules[static_cast<std::size_t>(a)];
            if (list.empty())
                throw DataError(std::string("rule set has no rules for aspect ") + aspect_name(a));
            std::set<int> prios;
            for (const auto& r : list)
                if (!prios.insert(r.priority).second)
                    throw DataError(std::string("duplicate rule priority within aspect ") +
                                    aspect_name(a));
        }
    }
};

// Count of tokens found in the appeal lexicon (occurrences, not distinct).
inline std::size_t appeal_hits(std::string_view text, const std::set<std::string>& lexicon) {
    std::size_t hits = 0;
    for (const auto& tok : textmodel::tokenize(text))
        if (lexicon.count(tok)) ++hits;
    return hits;
}

// Sentence terminators are . ! ? (a dot between two digits is a decimal
// point, not a terminator). A sentence containing ':' is treated as a
// "Key: value" run and further split on ';'.
inline std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> sentences;
    std::vector<std::string> raw;
    std::string cur;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        cur.push_back(c);
        bool terminator = (c == '!' || c == '?');
        if (c == '.') {
            bool prev_digit = i > 0 && std::isdigit(static_cast<unsigned char>(text[i - 1]));
            bool next_digit =
                i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1]));
            terminator = !(prev_digit && next_digit);
        }
        if (terminator) {
            raw.push_back(cur);
            cur.clear();
        }
    }
    if (!trim(cur).empty()) raw.push_back(cur);

    for (const auto& sentence : raw) {
        std::string t = trim(sentence);
        if (t.empty()) continue;
        if (t.find(':') != std::string::npos && t.find(';') != std::string::npos) {
            std::size_t start = 0;
            while (start <= t.size()) {
                auto semi = t.find(';', start);
                if (semi == std::string::npos) semi = t.size();
                std::string clause = trim(t.substr(start, semi - start));
                if (!clause.empty()) sentences.push_back(clause);
                start = semi + 1;
            }
        } else {
            sentences.push_back(t);
        }
    }
    return sentences;
}

inline AspectBundle segment(const std::string& description, const AspectRuleSet& ruleset) {
    ruleset.validate();
    AspectBundle bundle;
    auto sentences = split_sentences(description);
    bundle.sentence_count = sentences.size();
    for (std::size_t idx = 0; idx < sentences.size(); ++idx) {
        const std::string& sentence = sentences[idx];
        std::optional<Aspect> best;
        int best_priority = 0;
        for (Aspect a : kAspects) {
            for (const auto& rule : ruleset.rules[static_cast<std::size_t>(a)]) {
                if (best && rule.priority <= best_priority) continue;
                if (std::regex_search(sentence, rule.re)) {
                    best = a;
                    best_priority = rule.priority;
                }
            }
        }
        if (!best && appeal_hits(sentence, ruleset.appeal_lexicon) >=
                         static_cast<std::size_t>(ruleset.min_appeal_hits))
            best = Aspect::kLanguageAppeal;
        Span span{sentence, idx};
        if (best)
            bundle.segments[static_cast<std::size_t>(*best)].push_back(std::move(span));
        else
            bundle.residual.push_back(std::move(span));
    }
    return bundle;
}

inline std::array<int, kAspectCount> coverage_vector(const AspectBundle& bundle) {
    std::array<int, kAspectCount> cov{};
    for (std::size_t i = 0; i < kAspectCount; ++i)
        cov[i] = bundle.segments[i].empty() ? 0 : 1;
    return cov;
}

}  // namespace descgen::segmenter
