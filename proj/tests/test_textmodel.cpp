#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <map>

#include "descgen/textmodel.hpp"
#include "support/finite_diff.hpp"

using namespace descgen;
using namespace descgen::textmodel;

namespace {

LmConfig tiny_config(std::uint64_t seed = 7) {
    LmConfig c;
    c.d_model = 8;
    c.heads = 2;
    c.context_len = 16;
    c.vocab_cap = 64;
    c.seed = seed;
    return c;
}

TokenSequence seq_of(std::initializer_list<int> inner) {
    return TokenSequence::wrap(std::vector<int>(inner));
}

}  // namespace

TEST_CASE("tokenize lowercases and splits on punctuation", "[textmodel]") {
    auto toks = tokenize("Material: 61% Cotton/24% Polyester.");
    REQUIRE(toks == std::vector<std::string>{"material", "61", "cotton", "24", "polyester"});
    CHECK(tokenize("").empty());
    CHECK(tokenize("  \t ").empty());
    CHECK(tokenize("5'11\" frame") == std::vector<std::string>{"5", "11", "frame"});
}

TEST_CASE("vocabulary build respects min_frequency and ordering", "[textmodel]") {
    LmConfig c = tiny_config();

    SECTION("min_frequency 1 keeps both tokens") {
        auto v = Vocabulary::build({"a a b"}, c);
        REQUIRE(v.size() == 6);  // 4 reserved + a + b
        CHECK(v.id_of("a") == 4);  // higher frequency first
        CHECK(v.id_of("b") == 5);
    }
    SECTION("below-threshold tokens map to UNK") {
        c.min_frequency = 2;
        auto v = Vocabulary::build({"a a b"}, c);
        CHECK(v.has("a"));
        CHECK_FALSE(v.has("b"));
        CHECK(v.encode("b") == std::vector<int>{kUnkId});
    }
    SECTION("empty corpus is an error") {
        CHECK_THROWS_AS(Vocabulary::build({}, c), EmptyCorpus);
    }
    SECTION("frequency ties break by token text") {
        auto v = Vocabulary::build({"zeta alpha"}, c);
        CHECK(v.id_of("alpha") == 4);
        CHECK(v.id_of("zeta") == 5);
    }
    SECTION("cap truncates") {
        c.vocab_cap = 5;
        auto v = Vocabulary::build({"a a b"}, c);
        REQUIRE(v.size() == 5);
        CHECK(v.has("a"));
        CHECK_FALSE(v.has("b"));
    }
    SECTION("special tokens sit right after the reserved ids") {
        c.special_tokens = {"<x>", "<y>"};
        auto v = Vocabulary::build({"a"}, c);
        CHECK(v.id_of("<x>") == 4);
        CHECK(v.id_of("<y>") == 5);
        CHECK(v.id_of("a") == 6);
    }
}

TEST_CASE("vocabulary round-trips through its text file", "[textmodel]") {
    auto v = Vocabulary::build({"red shirt red"}, tiny_config());
    auto path = std::filesystem::temp_directory_path() / "descgen_vocab_test.txt";
    v.save(path);
    auto loaded = Vocabulary::load(path);
    REQUIRE(loaded.size() == v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        CHECK(loaded.token_of(static_cast<int>(i)) == v.token_of(static_cast<int>(i)));
    std::filesystem::remove(path);
}

TEST_CASE("zero params give uniform distributions", "[textmodel]") {
    LmConfig c = tiny_config();
    const std::size_t V = 12;
    LmParams p = LmParams::shaped(c, V);  // all tensors zero, including gains
    auto probs = forward(p, seq_of({4, 5, 6}));
    REQUIRE(probs.rows() == 4);
    for (std::size_t t = 0; t < probs.rows(); ++t)
        for (std::size_t j = 0; j < V; ++j)
            CHECK(probs.at(t, j) == Catch::Approx(1.0 / static_cast<double>(V)).margin(1e-12));
}

TEST_CASE("distributions are normalized", "[textmodel]") {
    LmParams p = LmParams::init(tiny_config(3), 20);
    auto probs = forward(p, seq_of({4, 9, 13, 17, 5}));
    for (std::size_t t = 0; t < probs.rows(); ++t) {
        double s = 0.0;
        for (std::size_t j = 0; j < probs.cols(); ++j) s += probs.at(t, j);
        CHECK(std::abs(s - 1.0) < 1e-6);
    }
}

TEST_CASE("causal mask: position depends only on the strict prefix", "[textmodel]") {
    LmParams p = LmParams::init(tiny_config(11), 20);
    TokenSequence a = seq_of({4, 5, 6, 7});
    TokenSequence b = a;
    const std::size_t j = 3;  // 0-based position of the changed token
    b.ids[j] = 15;
    auto pa = forward(p, a);
    auto pb = forward(p, b);
    // rows r < j predict tokens at positions <= j and must be untouched
    for (std::size_t r = 0; r < j; ++r)
        for (std::size_t col = 0; col < pa.cols(); ++col)
            CHECK(pa.at(r, col) == pb.at(r, col));
    // the change is visible strictly later
    double diff = 0.0;
    for (std::size_t col = 0; col < pa.cols(); ++col)
        diff += std::abs(pa.at(j, col) - pb.at(j, col));
    CHECK(diff > 0.0);
}

TEST_CASE("nll of zero params is ln(V) per predicted token", "[textmodel]") {
    LmConfig c = tiny_config();
    const std::size_t V = 12;
    LmParams p = LmParams::shaped(c, V);
    // one predicted token: [BOS, EOS]
    TokenSequence one;
    one.ids = {kBosId, kEosId};
    CHECK(nll_loss_value(p, one) == Catch::Approx(std::log(12.0)).epsilon(1e-12));
    // k predicted tokens: additivity
    auto s = seq_of({4, 5, 6});  // 4 predictions
    CHECK(nll_loss_value(p, s) == Catch::Approx(4.0 * std::log(12.0)).epsilon(1e-12));
}

TEST_CASE("analytic gradient matches central finite differences", "[textmodel][grad]") {
    const double h = 1e-5;
    double worst = 0.0;
    for (std::uint64_t draw = 0; draw < 10; ++draw) {
        LmParams p = LmParams::init(tiny_config(100 + draw), 14);
        // amplify the weights so every path (attention scores in particular)
        // carries gradient above finite-difference resolution
        p.for_each_tensor([&](const char* name, Tensor& t) {
            std::string n(name);
            if (n != "ln1_g" && n != "ln2_g")
                for (double& v : t.data) v *= 15.0;
        });
        Rng rng(500 + draw);
        std::vector<int> inner;
        for (int i = 0; i < 5; ++i)
            inner.push_back(4 + static_cast<int>(rng.next_below(10)));
        TokenSequence seq = TokenSequence::wrap(inner);

        auto analytic = nll_loss(p, seq);
        const std::size_t n = p.flat_size();
        for (int probe = 0; probe < 24; ++probe) {
            std::size_t idx = static_cast<std::size_t>(rng.next_below(n));
            double a = *analytic.grad.flat_at(idx);
            double numeric = testsupport::central_diff(
                p.flat_at(idx), h, [&] { return nll_loss_value(p, seq); });
            worst = std::max(worst, testsupport::rel_err(a, numeric));
        }
    }
    INFO("worst relative error " << worst);
    CHECK(worst <= 1e-4);
}

TEST_CASE("unused parameters get zero gradient", "[textmodel][grad]") {
    LmParams p = LmParams::init(tiny_config(42), 14);
    auto res = nll_loss(p, seq_of({4, 5}));
    // token 13 never appears: its embedding row cannot receive gradient
    for (std::size_t j = 0; j < p.config.d_model; ++j)
        CHECK(res.grad.tok_emb.at(13, j) == 0.0);
    // positions beyond the sequence length get none either
    for (std::size_t j = 0; j < p.config.d_model; ++j)
        CHECK(res.grad.pos_emb.at(10, j) == 0.0);
}

TEST_CASE("sequence validation", "[textmodel]") {
    LmParams p = LmParams::init(tiny_config(), 14);
    TokenSequence bad;
    bad.ids = {kBosId, 4, kPadId, 5, kEosId};
    CHECK_THROWS_AS(forward(p, bad), DataError);
    TokenSequence longseq;
    longseq.ids.push_back(kBosId);
    for (int i = 0; i < 30; ++i) longseq.ids.push_back(4);
    longseq.ids.push_back(kEosId);
    CHECK_THROWS_AS(forward(p, longseq), SequenceTooLong);
}

TEST_CASE("greedy decoding ignores the seed", "[textmodel][sample]") {
    LmParams p = LmParams::init(tiny_config(5), 14);
    DecodeConfig d;
    d.top_k = 1;
    d.max_new_tokens = 6;
    auto a = sample(p, {kBosId, 4}, d, 1);
    auto b = sample(p, {kBosId, 4}, d, 999);
    CHECK(a.seq.ids == b.seq.ids);
    CHECK(a.seq.ids.back() == kEosId);
    CHECK(a.seq.ids.size() <= 2 + 6 + 1);
}

TEST_CASE("same seed reproduces the same sample", "[textmodel][sample]") {
    LmParams p = LmParams::init(tiny_config(5), 14);
    DecodeConfig d;
    d.top_k = 8;
    d.temperature = 1.3;
    d.max_new_tokens = 8;
    auto a = sample(p, {kBosId, 4, 7}, d, 31);
    auto b = sample(p, {kBosId, 4, 7}, d, 31);
    CHECK(a.seq.ids == b.seq.ids);
    CHECK(a.loglik == b.loglik);
}

TEST_CASE("zero params sample uniformly (chi-square)", "[textmodel][sample]") {
    LmConfig c = tiny_config();
    const std::size_t V = 10;
    LmParams p = LmParams::shaped(c, V);
    DecodeConfig d;
    d.top_k = V;
    d.temperature = 1.0;
    d.max_new_tokens = 1;
    std::map<int, int> counts;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        auto r = sample(p, {kBosId}, d, 1000 + static_cast<std::uint64_t>(i));
        counts[r.seq.ids[1]] += 1;
    }
    double chi2 = 0.0;
    const double expected = static_cast<double>(draws) / static_cast<double>(V);
    for (std::size_t v = 0; v < V; ++v) {
        double obs = static_cast<double>(counts[static_cast<int>(v)]);
        chi2 += (obs - expected) * (obs - expected) / expected;
    }
    // chi-square critical value, df=9, alpha=0.01
    CHECK(chi2 < 21.666);
}

TEST_CASE("sampled loglik matches forward probabilities", "[textmodel][sample]") {
    LmParams p = LmParams::init(tiny_config(9), 14);
    DecodeConfig d;
    d.top_k = 5;
    d.max_new_tokens = 6;
    auto r = sample(p, {kBosId, 4}, d, 77);
    REQUIRE(r.seq.ids.size() >= 3);
    if (r.eos_forced) return;  // forced EOS carries no draw probability
    auto probs = forward(p, r.seq);
    double ll = 0.0;
    // generated tokens start after the 2-token prefix
    for (std::size_t pos = 2; pos < r.seq.ids.size(); ++pos)
        ll += std::log(probs.at(pos - 1, static_cast<std::size_t>(r.seq.ids[pos])));
    CHECK(ll == Catch::Approx(r.loglik).margin(1e-9));
}

TEST_CASE("checkpoint round-trips bit-exactly", "[textmodel]") {
    LmParams p = LmParams::init(tiny_config(21), 14);
    auto path = std::filesystem::temp_directory_path() / "descgen_lm_test.bin";
    save_checkpoint(p, path);
    LmParams q = load_checkpoint(path);
    CHECK(q.config.d_model == p.config.d_model);
    CHECK(q.vocab == p.vocab);
    bool identical = true;
    p.for_each_tensor([&](const char* name, const Tensor& t) {
        q.for_each_tensor([&](const char* name2, const Tensor& t2) {
            if (std::string(name) != name2) return;
            identical = identical && t.data == t2.data;
        });
    });
    CHECK(identical);
    std::filesystem::remove(path);
}

TEST_CASE("overfitting a single short sequence", "[textmodel][slow]") {
    // 200 plain gradient-descent steps on one 10-token sequence drive
    // per-token NLL below 0.1.
    LmConfig c = tiny_config(123);
    c.d_model = 16;
    LmParams p = LmParams::init(c, 16);
    std::vector<int> inner = {4, 7, 5, 9, 4, 11, 6, 8, 10};  // 10 predictions with EOS
    TokenSequence seq = TokenSequence::wrap(inner);
    const double lr = 0.3;
    const double clip = 5.0;
    double loss = 0.0;
    for (int step = 0; step < 200; ++step) {
        auto res = nll_loss(p, seq);
        loss = res.loss;
        double norm2 = 0.0;
        res.grad.for_each_tensor(
            [&](const char*, const Tensor& g) { norm2 += squared_norm(g); });
        const double scale = std::sqrt(norm2) > clip ? clip / std::sqrt(norm2) : 1.0;
        res.grad.for_each_tensor([&](const char* name, const Tensor& g) {
            p.for_each_tensor([&](const char* name2, Tensor& t) {
                if (std::string(name) == name2) axpy(t, -lr * scale, g);
            });
        });
    }
    double per_token = loss / static_cast<double>(seq.predicted_tokens());
    INFO("final per-token NLL " << per_token);
    CHECK(per_token < 0.1);
}
