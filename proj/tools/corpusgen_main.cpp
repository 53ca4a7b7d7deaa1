// Regenerates the bundled data files (synthetic corpus, ratings, the
// trade-off ablation fixture, rule/lexicon files, and run configs). All
// output is deterministic; the repository ships the generated files and this
// tool exists so they can be rebuilt or resized.

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "descgen/common.hpp"
#include "descgen/corpus.hpp"
#include "descgen/rng.hpp"
#include "descgen/segmenter.hpp"

namespace {

using descgen::Rng;
using descgen::corpus::Item;

struct Category {
    const char* name;
    const char* store;
    const char* noun;
    const char* material;
    const char* feature;
    std::array<const char*, 3> adjectives;  // from the appeal lexicon
    const char* dim_word;
};

const std::array<Category, 4> kCategories = {{
    {"apparel", "northway", "jacket", "cotton twill", "storm cuff", {"cozy", "soft", "classic"}, "sleeve"},
    {"kitchen", "coppercrest", "kettle", "brushed steel", "pour spout", {"sleek", "modern", "smooth"}, "handle"},
    {"garden", "greenfield", "trellis", "cedar lattice", "anchor stake", {"fresh", "vibrant", "charming"}, "frame"},
    {"audio", "tonehaven", "speaker", "walnut veneer", "bass port", {"warm", "refined", "timeless"}, "grille"},
}};

std::string top_description(const Category& c, Rng& rng) {
    const char* a1 = c.adjectives[rng.next_below(3)];
    const char* a2 = c.adjectives[rng.next_below(3)];
    const int size = 8 + static_cast<int>(rng.next_below(40));
    std::string d;
    d += std::string("A ") + a1 + " and " + a2 + " " + c.noun + " with a polished look. ";
    d += std::string("Material: ") + c.material + ". Care: machine washable. ";
    d += "Size: " + std::to_string(size) + " inch " + c.dim_word + ". ";
    if (rng.next_below(5) != 0)
        d += std::string("Features a patented ") + c.feature + " design. ";
    if (rng.next_below(5) != 0)
        d += std::string("Lifetime warranty, only at ") + c.store + ".";
    return descgen::trim(d);
}

std::string bottom_description(Rng& rng) {
    switch (rng.next_below(5)) {
        case 0:
            return "";  // cold start: nothing to show yet
        case 1:
            return "Basic plain thing.";
        case 2:
            return "Ordinary grey object for general use.";
        case 3:
            return "Some item. Nothing else known.";
        default:
            return "Plain stock piece without extras.";
    }
}

long long clamp_clicks(double ctr, long long impressions) {
    long long clicks = static_cast<long long>(ctr * static_cast<double>(impressions));
    if (clicks < 0) clicks = 0;
    if (clicks > impressions) clicks = impressions;
    return clicks;
}

std::vector<Item> synthetic_items() {
    Rng rng(20240811);
    std::vector<Item> items;
    int serial = 0;
    for (const auto& cat : kCategories) {
        for (int i = 0; i < 28; ++i) {  // high-engagement references
            Item it;
            it.item_id = "s" + std::to_string(++serial);
            it.title = std::string(cat.store) + " " + cat.adjectives[i % 3] + " " + cat.noun;
            it.description = top_description(cat, rng);
            it.category = cat.name;
            it.impressions = 400 + static_cast<long long>(rng.next_below(600));
            double ctr = 0.30 + 0.25 * rng.next_double();
            if (it.description.find("warranty") != std::string::npos) ctr += 0.10;
            if (it.description.find("patented") != std::string::npos) ctr += 0.05;
            it.clicks = clamp_clicks(ctr, it.impressions);
            items.push_back(std::move(it));
        }
        for (int i = 0; i < 27; ++i) {  // low-engagement enhancement targets
            Item it;
            it.item_id = "s" + std::to_string(++serial);
            it.title = std::string(cat.store) + " " + cat.adjectives[(i + 1) % 3] + " " + cat.noun;
            it.description = bottom_description(rng);
            it.category = cat.name;
            it.impressions = 400 + static_cast<long long>(rng.next_below(600));
            it.clicks = clamp_clicks(0.01 + 0.12 * rng.next_double(), it.impressions);
            items.push_back(std::move(it));
        }
    }
    return items;
}

// Trade-off fixture: three description families engineered so that pure
// likelihood selection and pure ctr selection both pick text that mismatches
// the target-category references, while a blended selection picks the target
// family.
//
// The likelihood order (common > target > bait) comes from family frequency
// plus within-family variant entropy: the common family is a single exact
// template, the target family has one variant token per sentence, the bait
// family has two or three. The ctr order (bait > target > common) comes from
// appeal-lexicon density alone (per sentence: common 0, target 3, bait 4
// hits, with 2/3/4 in the appeal sentence); every family has the same total
// token count and exactly one numeric token, so no other feature carries
// signal. Families diverge at the first content token of every sentence, so
// a trained model's branch probabilities mirror the family frequencies.
std::string tradeoff_description(int family, int variant) {
    auto pick = [&](std::initializer_list<const char*> options) {
        return *(options.begin() + variant % options.size());
    };
    std::string d;
    switch (family) {
        case 0:  // common filler: one exact template, no appeal words
            d += "Smooth modern panel look arrangement. ";
            d += "Material: standard canvas panel cloth back side. ";
            d += "Size: 10 inch plain frame panel railing. ";
            d += "Features recessed corner joint work line sets. ";
            d += "Covered by a warranty from northstore counter station.";
            break;
        case 1:  // target: two variants, one divergence token per sentence
            d += std::string("Elegant timeless lovely weave ") + pick({"tone", "hue"}) + ". ";
            d += std::string("Material: soft plush refined merino twill ") +
                 pick({"thread", "strand"}) + ". ";
            d += std::string("Size: 28 inch sleek premium trim ") + pick({"drape", "fold"}) + ". ";
            d += std::string("Features patented warm refined plush loom ") +
                 pick({"core", "span"}) + ". ";
            d += std::string("Only at rivertrade outfitters warm premium soft ") +
                 pick({"stand", "counter"}) + ".";
            break;
        default:  // bait: three variants, two divergence tokens per sentence
            d += std::string("Dazzling gorgeous glam ") + pick({"plush", "cozy", "comfy"}) + " " +
                 pick({"shine", "gleam", "spark"}) + ". ";
            d += std::string("Material: plush dazzling gorgeous glam ") +
                 pick({"linen", "cotton", "denim"}) + " " + pick({"fiber", "cloth", "silk"}) + ". ";
            d += std::string("Size: 99 inch dazzling plush ") + pick({"cozy", "comfy", "glam"}) +
                 " " + pick({"span", "glow", "sheen"}) + ". ";
            d += std::string("Features dazzling glam cozy ") + pick({"plush", "comfy", "soft"}) +
                 " " + pick({"gleam", "sheen", "spark"}) + " core. ";
            d += std::string("Warranty dazzling plush ") + pick({"glam", "cozy", "comfy"}) + " " +
                 pick({"vibrant", "stunning", "fresh"}) + " only at megamart.";
            break;
    }
    return d;
}

std::vector<Item> tradeoff_items() {
    Rng rng(777001);
    std::vector<Item> items;
    int serial = 0;
    auto add_ref = [&](int family, int variant, const char* category, double ctr) {
        Item it;
        it.item_id = "t" + std::to_string(++serial);
        it.title = "omega unit";
        it.description = tradeoff_description(family, variant);
        // 0..2 copies of a neutral residual sentence, balanced within each
        // family: gives the length features honest variance with no label
        // correlation, so normalized candidate features stay in range
        for (int pad = 0; pad < variant % 3; ++pad)
            it.description += " General listing reference note.";
        it.category = category;
        it.impressions = 1000;
        it.clicks = clamp_clicks(ctr + 0.01 * rng.next_double(), it.impressions);
        items.push_back(std::move(it));
    };
    // 13 common references, 6 target, 5 bait: the branch frequencies the
    // language model absorbs; reference count equals test count so the
    // engagement split keeps every reference in train
    for (int i = 0; i < 13; ++i) add_ref(0, i, "filler_common", 0.20);
    for (int i = 0; i < 6; ++i) add_ref(1, i, "target", 0.55);
    for (int i = 0; i < 5; ++i) add_ref(2, i, "filler_bait", 0.93);
    // 24 low-engagement target-category items to enhance
    for (int i = 0; i < 24; ++i) {
        Item it;
        it.item_id = "t" + std::to_string(++serial);
        it.title = "omega unit";
        it.description = i % 3 == 0 ? "" : "Spare omega unit piece.";
        it.category = "target";
        it.impressions = 1000;
        it.clicks = clamp_clicks(0.02 + 0.03 * rng.next_double(), it.impressions);
        items.push_back(std::move(it));
    }
    return items;
}

std::string ratings_for(const std::vector<Item>& items, double split_threshold) {
    std::string body;
    auto emit = [&](const std::string& id, int grade) {
        for (int rater = 1; rater <= 2; ++rater) {
            int jitter = static_cast<int>(descgen::splitmix64(descgen::fnv1a64(id) + rater) % 3) - 1;
            int r = grade + (rater == 2 ? jitter : 0);
            if (r < 1) r = 1;
            if (r > 5) r = 5;
            body += "{\"item_id\":\"" + id + "\",\"rater_id\":\"r" + std::to_string(rater) +
                    "\",\"rating\":" + std::to_string(r) + "}\n";
        }
    };
    for (const auto& it : items) {
        const double ctr = descgen::corpus::empirical_ctr(it).value;
        const bool top = ctr >= split_threshold;
        const int base = top ? 4 + static_cast<int>(descgen::fnv1a64(it.item_id) % 2)
                             : 1 + static_cast<int>(descgen::fnv1a64(it.item_id) % 3);
        emit(it.item_id, base);
        emit(it.item_id + "#enhanced", 3 + static_cast<int>(descgen::fnv1a64(it.item_id) % 3));
    }
    return body;
}

const char* kSyntheticCfg =
    "# bundled synthetic corpus, library defaults otherwise\n"
    "dataset=data/synthetic_corpus.jsonl\n"
    "ratings=data/synthetic_ratings.jsonl\n"
    "out=out/synthetic\n";

const char* kTradeoffCfg =
    "# planted likelihood/ctr trade-off fixture for the blend-weight sweep\n"
    "dataset=data/tradeoff_corpus.jsonl\n"
    "ratings=data/tradeoff_ratings.jsonl\n"
    "out=out/tradeoff\n"
    "d_model=32\n"
    "heads=2\n"
    "context_len=64\n"
    "epochs=300\n"
    "lr_lm=0.5\n"
    "batch_size=16\n"
    "n_candidates=20\n"
    "top_k=8\n"
    "temperature=0.9\n"
    "max_new_tokens=12\n"
    "ablation_seeds=5\n"
    "ablation_mode=rerank\n";

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"regenerate the bundled data files"};
    std::string out_dir = "data";
    app.add_option("--out", out_dir, "output directory");
    CLI11_PARSE(app, argc, argv);

    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const fs::path out(out_dir);

    descgen::write_file_atomic(out / "rules.tsv", descgen::segmenter::kDefaultRulesTsv);
    std::string lexicon;
    for (const auto& tok :
         descgen::segmenter::AspectRuleSet::default_lexicon())
        lexicon += tok + "\n";
    descgen::write_file_atomic(out / "appeal_lexicon.txt", lexicon);

    auto synthetic = synthetic_items();
    descgen::corpus::save_dataset(out / "synthetic_corpus.jsonl", synthetic);
    auto synthetic_split = descgen::corpus::split_by_engagement(synthetic);
    descgen::write_file_atomic(out / "synthetic_ratings.jsonl",
                               ratings_for(synthetic, synthetic_split.median_ctr));

    auto tradeoff = tradeoff_items();
    descgen::corpus::save_dataset(out / "tradeoff_corpus.jsonl", tradeoff);
    auto tradeoff_split = descgen::corpus::split_by_engagement(tradeoff);
    descgen::write_file_atomic(out / "tradeoff_ratings.jsonl",
                               ratings_for(tradeoff, tradeoff_split.median_ctr));

    descgen::write_file_atomic(out / "synthetic.cfg", kSyntheticCfg);
    descgen::write_file_atomic(out / "tradeoff.cfg", kTradeoffCfg);

    std::printf("wrote %s: %zu synthetic items, %zu tradeoff items\n", out_dir.c_str(),
                synthetic.size(), tradeoff.size());
    return 0;
}
