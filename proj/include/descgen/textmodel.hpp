#pragma once
// Tokenizer, vocabulary, and a small autoregressive next-token model: one
// causal self-attention block with post-norm residuals, trained in double
// precision with hand-derived analytic gradients so they can be verified
// against central finite differences.
//
// Layout per sequence (T input positions, predicting positions 1..T):
//   x0    = tok_emb[ids] + pos_emb
//   attn  = MultiHeadCausalAttention(x0) . Wo
//   x1    = LayerNorm(x0 + attn; g1, b1)
//   f     = relu(x1 . W1) . W2
//   x2    = LayerNorm(x1 + f; g2, b2)
//   logit = x2 . Wout

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "descgen/common.hpp"
#include "descgen/rng.hpp"
#include "descgen/tensor.hpp"

namespace descgen::textmodel {

inline constexpr int kPadId = 0;
inline constexpr int kBosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kUnkId = 3;
inline constexpr int kReservedCount = 4;

inline constexpr const char* kReservedTokens[kReservedCount] = {"<pad>", "<bos>", "<eos>",
                                                                "<unk>"};

struct EmptyCorpus : DataError {
    EmptyCorpus() : DataError("vocabulary build requires a non-empty corpus") {}
};
struct SequenceTooLong : DataError {
    explicit SequenceTooLong(std::size_t len, std::size_t cap)
        : DataError("sequence length " + std::to_string(len) + " exceeds context length " +
                    std::to_string(cap)) {}
};

// Lowercased word/number tokens. ASCII alphanumerics and bytes >= 0x80 are
// token characters; everything else separates tokens.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : text) {
        bool word = (c >= 0x80) || std::isalnum(c);
        if (word) {
            cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

struct LmConfig {
    std::size_t d_model = 64;
    std::size_t heads = 2;
    std::size_t context_len = 128;
    std::size_t vocab_cap = 8192;
    std::size_t min_frequency = 1;
    std::uint64_t seed = 0;
    // Extra reserved tokens placed right after the four built-ins
    // (the pipeline registers one control token per aspect here).
    std::vector<std::string> special_tokens;

    void validate() const {
        if (d_model == 0 || heads == 0 || d_model % heads != 0)
            throw ConfigError("d_model must be a positive multiple of heads");
        if (context_len < 2) throw ConfigError("context_len must be >= 2");
    }
};

class Vocabulary {
  public:
    Vocabulary() = default;

    // Frequency-filtered vocabulary with deterministic ordering:
    // reserved ids, then special tokens, then corpus tokens by
    // (frequency desc, token asc), truncated at the cap.
    static Vocabulary build(const std::vector<std::string>& corpus, const LmConfig& config) {
        if (corpus.empty()) throw EmptyCorpus();
        std::map<std::string, std::size_t> freq;
        for (const auto& text : corpus)
            for (auto& tok : tokenize(text)) ++freq[tok];

        Vocabulary v;
        for (const char* t : kReservedTokens) v.push_token(t);
        for (const auto& t : config.special_tokens) v.push_token(t);
        v.special_count_ = v.size();

        std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        std::size_t min_freq = std::max<std::size_t>(1, config.min_frequency);
        for (const auto& [tok, count] : ranked) {
            if (count < min_freq) continue;
            if (v.size() >= config.vocab_cap) break;
            v.push_token(tok);
        }
        return v;
    }

    std::size_t size() const { return id_to_token_.size(); }

    int id_of(std::string_view token) const {
        auto it = token_to_id_.find(std::string(token));
        return it == token_to_id_.end() ? kUnkId : it->second;
    }

    const std::string& token_of(int id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }

    bool has(std::string_view token) const {
        return token_to_id_.count(std::string(token)) != 0;
    }

    std::vector<int> encode(std::string_view text) const {
        std::vector<int> ids;
        for (auto& tok : tokenize(text)) ids.push_back(id_of(tok));
        return ids;
    }

    // Plain-text rendering: special tokens (reserved ids and control tokens)
    // never appear in decoded text.
    std::string decode(const std::vector<int>& ids) const {
        std::string out;
        for (int id : ids) {
            if (id < static_cast<int>(special_count_)) continue;
            if (!out.empty()) out.push_back(' ');
            out += token_of(id);
        }
        return out;
    }

    std::size_t special_count() const { return special_count_; }

    // One token per line; the id is the line number.
    void save(const std::filesystem::path& path) const {
        std::string body;
        for (const auto& t : id_to_token_) {
            body += t;
            body.push_back('\n');
        }
        write_file_atomic(path, body);
    }

    static Vocabulary load(const std::filesystem::path& path) {
        Vocabulary v;
        for (const auto& line : read_lines(path)) v.push_token(line);
        if (v.size() < kReservedCount) throw DataError("vocabulary file too short: " + path.string());
        for (int i = 0; i < kReservedCount; ++i)
            if (v.token_of(i) != kReservedTokens[i])
                throw DataError("vocabulary file missing reserved tokens: " + path.string());
        // special tokens are exactly the leading <...> entries
        v.special_count_ = 0;
        while (v.special_count_ < v.size()) {
            const std::string& t = v.id_to_token_[v.special_count_];
            if (t.size() >= 2 && t.front() == '<' && t.back() == '>')
                ++v.special_count_;
            else
                break;
        }
        return v;
    }

  private:
    void push_token(const std::string& tok) {
        token_to_id_.emplace(tok, static_cast<int>(id_to_token_.size()));
        id_to_token_.push_back(tok);
    }

    std::vector<std::string> id_to_token_;
    std::map<std::string, int> token_to_id_;
    std::size_t special_count_ = kReservedCount;
};

struct TokenSequence {
    std::vector<int> ids;  // starts with BOS, ends with EOS

    static TokenSequence wrap(std::vector<int> inner) {
        TokenSequence s;
        s.ids.reserve(inner.size() + 2);
        s.ids.push_back(kBosId);
        for (int id : inner) s.ids.push_back(id);
        s.ids.push_back(kEosId);
        return s;
    }

    std::size_t size() const { return ids.size(); }
    std::size_t predicted_tokens() const { return ids.size() - 1; }

    void validate() const {
        if (ids.size() < 2) throw DataError("token sequence must have length >= 2");
        if (ids.front() != kBosId) throw DataError("token sequence must start with BOS");
        if (ids.back() != kEosId) throw DataError("token sequence must end with EOS");
        for (std::size_t i = 1; i + 1 < ids.size(); ++i)
            if (ids[i] == kPadId) throw DataError("token sequence must not contain interior PAD");
    }
};

struct LmParams {
    LmConfig config;
    std::size_t vocab = 0;

    Tensor tok_emb;  // vocab x d
    Tensor pos_emb;  // context_len x d
    Tensor wq, wk, wv, wo;  // d x d
    Tensor ln1_g, ln1_b;    // d
    Tensor w1;              // d x 4d
    Tensor w2;              // 4d x d
    Tensor ln2_g, ln2_b;    // d
    Tensor wout;            // d x vocab

    static LmParams shaped(const LmConfig& config, std::size_t vocab_size) {
        config.validate();
        LmParams p;
        p.config = config;
        p.vocab = vocab_size;
        const std::size_t d = config.d_model;
        p.tok_emb = Tensor::zeros(vocab_size, d);
        p.pos_emb = Tensor::zeros(config.context_len, d);
        p.wq = Tensor::zeros(d, d);
        p.wk = Tensor::zeros(d, d);
        p.wv = Tensor::zeros(d, d);
        p.wo = Tensor::zeros(d, d);
        p.ln1_g = Tensor::zeros(d);
        p.ln1_b = Tensor::zeros(d);
        p.w1 = Tensor::zeros(d, 4 * d);
        p.w2 = Tensor::zeros(4 * d, d);
        p.ln2_g = Tensor::zeros(d);
        p.ln2_b = Tensor::zeros(d);
        p.wout = Tensor::zeros(d, vocab_size);
        return p;
    }

    // Gaussian(0, 0.02) weights, unit layer-norm gains, zero biases.
    static LmParams init(const LmConfig& config, std::size_t vocab_size) {
        LmParams p = shaped(config, vocab_size);
        Rng rng(config.seed);
        const double stddev = 0.02;
        p.tok_emb.fill_gaussian(rng, stddev);
        p.pos_emb.fill_gaussian(rng, stddev);
        p.wq.fill_gaussian(rng, stddev);
        p.wk.fill_gaussian(rng, stddev);
        p.wv.fill_gaussian(rng, stddev);
        p.wo.fill_gaussian(rng, stddev);
        p.ln1_g = Tensor::full(config.d_model, 1.0);
        p.w1.fill_gaussian(rng, stddev);
        p.w2.fill_gaussian(rng, stddev);
        p.ln2_g = Tensor::full(config.d_model, 1.0);
        p.wout.fill_gaussian(rng, stddev);
        return p;
    }

    static LmParams zeros_like(const LmParams& other) {
        LmParams p = shaped(other.config, other.vocab);
        p.ln1_g.set_zero();
        p.ln2_g.set_zero();
        return p;
    }

    template <typename Fn>
    void for_each_tensor(Fn&& fn) {
        fn("tok_emb", tok_emb);
        fn("pos_emb", pos_emb);
        fn("wq", wq);
        fn("wk", wk);
        fn("wv", wv);
        fn("wo", wo);
        fn("ln1_g", ln1_g);
        fn("ln1_b", ln1_b);
        fn("w1", w1);
        fn("w2", w2);
        fn("ln2_g", ln2_g);
        fn("ln2_b", ln2_b);
        fn("wout", wout);
    }

    template <typename Fn>
    void for_each_tensor(Fn&& fn) const {
        const_cast<LmParams*>(this)->for_each_tensor(
            [&](const char* name, Tensor& t) { fn(name, static_cast<const Tensor&>(t)); });
    }

    std::size_t flat_size() const {
        std::size_t n = 0;
        for_each_tensor([&](const char*, const Tensor& t) { n += t.size(); });
        return n;
    }

    double* flat_at(std::size_t index) {
        double* out = nullptr;
        for_each_tensor([&](const char*, Tensor& t) {
            if (out) return;
            if (index < t.size()) {
                out = &t.data[index];
                return;
            }
            index -= t.size();
        });
        return out;
    }

    bool all_finite() const {
        bool ok = true;
        for_each_tensor([&](const char*, const Tensor& t) { ok = ok && t.all_finite(); });
        return ok;
    }
};

inline constexpr double kLnEps = 1e-5;

namespace detail {

struct LnCache {
    Tensor xhat;     // T x d
    Tensor inv_std;  // T
};

// y = g * (x - mean) / sqrt(var + eps) + b, rowwise.
inline Tensor layer_norm(const Tensor& x, const Tensor& g, const Tensor& b, LnCache& cache) {
    const std::size_t rows = x.shape[0], d = x.shape[1];
    Tensor y = Tensor::zeros(rows, d);
    cache.xhat = Tensor::zeros(rows, d);
    cache.inv_std = Tensor::zeros(rows);
    for (std::size_t t = 0; t < rows; ++t) {
        const double* xr = x.row(t);
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += xr[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            double c = xr[j] - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        double inv = 1.0 / std::sqrt(var + kLnEps);
        cache.inv_std.at(t) = inv;
        double* xh = cache.xhat.row(t);
        double* yr = y.row(t);
        for (std::size_t j = 0; j < d; ++j) {
            xh[j] = (xr[j] - mean) * inv;
            yr[j] = g.at(j) * xh[j] + b.at(j);
        }
    }
    return y;
}

// Given dY, accumulates dg/db and returns dX.
inline Tensor layer_norm_backward(const Tensor& dy, const LnCache& cache, const Tensor& g,
                                  Tensor& dg, Tensor& db) {
    const std::size_t rows = dy.shape[0], d = dy.shape[1];
    Tensor dx = Tensor::zeros(rows, d);
    for (std::size_t t = 0; t < rows; ++t) {
        const double* dyr = dy.row(t);
        const double* xh = cache.xhat.row(t);
        const double inv = cache.inv_std.at(t);
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            dg.at(j) += dyr[j] * xh[j];
            db.at(j) += dyr[j];
            double dxh = dyr[j] * g.at(j);
            mean_dxhat += dxh;
            mean_dxhat_xhat += dxh * xh[j];
        }
        mean_dxhat /= static_cast<double>(d);
        mean_dxhat_xhat /= static_cast<double>(d);
        double* dxr = dx.row(t);
        for (std::size_t j = 0; j < d; ++j) {
            double dxh = dyr[j] * g.at(j);
            dxr[j] = (dxh - mean_dxhat - xh[j] * mean_dxhat_xhat) * inv;
        }
    }
    return dx;
}

struct ForwardCache {
    std::vector<int> inputs;   // ids[0..T-1]
    std::vector<int> targets;  // ids[1..T]
    Tensor x0, q, k, v, heads_out, attn;
    std::vector<Tensor> att;  // per head, T x T lower-triangular rows
    Tensor r1, x1, pre, hact, f, r2, x2, logits, probs;
    LnCache ln1, ln2;
    double loss = 0.0;
};

// Full forward pass over the T = len-1 input positions; probs row t is the
// next-token distribution after consuming tokens 0..t.
inline void forward_full(const LmParams& p, const TokenSequence& seq, ForwardCache& c) {
    seq.validate();
    if (seq.size() > p.config.context_len) throw SequenceTooLong(seq.size(), p.config.context_len);
    const std::size_t T = seq.size() - 1;
    const std::size_t d = p.config.d_model;
    const std::size_t H = p.config.heads;
    const std::size_t dk = d / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

    c.inputs.assign(seq.ids.begin(), seq.ids.end() - 1);
    c.targets.assign(seq.ids.begin() + 1, seq.ids.end());

    c.x0 = Tensor::zeros(T, d);
    for (std::size_t t = 0; t < T; ++t) {
        const double* te = p.tok_emb.row(static_cast<std::size_t>(c.inputs[t]));
        const double* pe = p.pos_emb.row(t);
        double* xr = c.x0.row(t);
        for (std::size_t j = 0; j < d; ++j) xr[j] = te[j] + pe[j];
    }

    c.q = matmul(c.x0, p.wq);
    c.k = matmul(c.x0, p.wk);
    c.v = matmul(c.x0, p.wv);

    c.heads_out = Tensor::zeros(T, d);
    c.att.assign(H, Tensor());
    for (std::size_t h = 0; h < H; ++h) {
        const std::size_t off = h * dk;
        Tensor& A = c.att[h];
        A = Tensor::zeros(T, T);
        for (std::size_t i = 0; i < T; ++i) {
            const double* qi = c.q.row(i) + off;
            double* arow = A.row(i);
            double maxs = -1e300;
            for (std::size_t j = 0; j <= i; ++j) {
                const double* kj = c.k.row(j) + off;
                double s = 0.0;
                for (std::size_t x = 0; x < dk; ++x) s += qi[x] * kj[x];
                s *= scale;
                arow[j] = s;
                maxs = std::max(maxs, s);
            }
            double denom = 0.0;
            for (std::size_t j = 0; j <= i; ++j) {
                arow[j] = std::exp(arow[j] - maxs);
                denom += arow[j];
            }
            double* orow = c.heads_out.row(i) + off;
            for (std::size_t j = 0; j <= i; ++j) {
                arow[j] /= denom;
                const double* vj = c.v.row(j) + off;
                for (std::size_t x = 0; x < dk; ++x) orow[x] += arow[j] * vj[x];
            }
        }
    }

    c.attn = matmul(c.heads_out, p.wo);
    c.r1 = c.x0;
    for (std::size_t i = 0; i < c.r1.size(); ++i) c.r1.data[i] += c.attn.data[i];
    c.x1 = layer_norm(c.r1, p.ln1_g, p.ln1_b, c.ln1);

    c.pre = matmul(c.x1, p.w1);
    c.hact = c.pre;
    for (double& x : c.hact.data) x = x > 0.0 ? x : 0.0;
    c.f = matmul(c.hact, p.w2);
    c.r2 = c.x1;
    for (std::size_t i = 0; i < c.r2.size(); ++i) c.r2.data[i] += c.f.data[i];
    c.x2 = layer_norm(c.r2, p.ln2_g, p.ln2_b, c.ln2);

    c.logits = matmul(c.x2, p.wout);

    const std::size_t V = p.vocab;
    c.probs = Tensor::zeros(T, V);
    c.loss = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        const double* lr = c.logits.row(t);
        double maxl = lr[0];
        for (std::size_t j = 1; j < V; ++j) maxl = std::max(maxl, lr[j]);
        double denom = 0.0;
        double* pr = c.probs.row(t);
        for (std::size_t j = 0; j < V; ++j) {
            pr[j] = std::exp(lr[j] - maxl);
            denom += pr[j];
        }
        for (std::size_t j = 0; j < V; ++j) pr[j] /= denom;
        double logprob = lr[static_cast<std::size_t>(c.targets[t])] - maxl - std::log(denom);
        c.loss -= logprob;
    }
}

}  // namespace detail

// Per-position next-token distributions: row t (0-based) is conditioned on
// tokens 0..t only, i.e. the distribution that scores token t+1.
inline Tensor forward(const LmParams& params, const TokenSequence& seq) {
    detail::ForwardCache c;
    detail::forward_full(params, seq, c);
    return c.probs;
}

inline double nll_loss_value(const LmParams& params, const TokenSequence& seq) {
    detail::ForwardCache c;
    detail::forward_full(params, seq, c);
    return c.loss;
}

struct NllResult {
    double loss = 0.0;
    LmParams grad;
};

// Loss and exact gradient for one sequence. Gradients accumulate into
// `grad` (callers zero it or chain batches).
inline double nll_loss_accumulate(const LmParams& p, const TokenSequence& seq, LmParams& grad) {
    detail::ForwardCache c;
    detail::forward_full(p, seq, c);

    const std::size_t T = seq.size() - 1;
    const std::size_t d = p.config.d_model;
    const std::size_t H = p.config.heads;
    const std::size_t dk = d / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

    // dlogits = probs - onehot(target)
    Tensor dlogits = c.probs;
    for (std::size_t t = 0; t < T; ++t)
        dlogits.at(t, static_cast<std::size_t>(c.targets[t])) -= 1.0;

    axpy(grad.wout, 1.0, matmul_tn(c.x2, dlogits));
    Tensor dx2 = matmul_nt(dlogits, p.wout);

    Tensor dr2 = detail::layer_norm_backward(dx2, c.ln2, p.ln2_g, grad.ln2_g, grad.ln2_b);
    Tensor dx1 = dr2;  // residual branch
    // feed-forward branch
    axpy(grad.w2, 1.0, matmul_tn(c.hact, dr2));
    Tensor dh = matmul_nt(dr2, p.w2);
    for (std::size_t i = 0; i < dh.size(); ++i)
        if (c.pre.data[i] <= 0.0) dh.data[i] = 0.0;
    axpy(grad.w1, 1.0, matmul_tn(c.x1, dh));
    axpy(dx1, 1.0, matmul_nt(dh, p.w1));

    Tensor dr1 = detail::layer_norm_backward(dx1, c.ln1, p.ln1_g, grad.ln1_g, grad.ln1_b);
    Tensor dx0 = dr1;  // residual branch
    // attention branch
    axpy(grad.wo, 1.0, matmul_tn(c.heads_out, dr1));
    Tensor dheads = matmul_nt(dr1, p.wo);

    Tensor dq = Tensor::zeros(T, d), dkt = Tensor::zeros(T, d), dv = Tensor::zeros(T, d);
    for (std::size_t h = 0; h < H; ++h) {
        const std::size_t off = h * dk;
        const Tensor& A = c.att[h];
        for (std::size_t i = 0; i < T; ++i) {
            const double* arow = A.row(i);
            const double* dorow = dheads.row(i) + off;
            // dA and softmax backward, restricted to j <= i
            double dot = 0.0;
            std::vector<double> da(i + 1);
            for (std::size_t j = 0; j <= i; ++j) {
                const double* vj = c.v.row(j) + off;
                double s = 0.0;
                for (std::size_t x = 0; x < dk; ++x) s += dorow[x] * vj[x];
                da[j] = s;
                dot += arow[j] * s;
                double* dvj = dv.row(j) + off;
                for (std::size_t x = 0; x < dk; ++x) dvj[x] += arow[j] * dorow[x];
            }
            const double* qi = c.q.row(i) + off;
            double* dqi = dq.row(i) + off;
            for (std::size_t j = 0; j <= i; ++j) {
                double ds = arow[j] * (da[j] - dot) * scale;
                if (ds == 0.0) continue;
                const double* kj = c.k.row(j) + off;
                double* dkj = dkt.row(j) + off;
                for (std::size_t x = 0; x < dk; ++x) {
                    dqi[x] += ds * kj[x];
                    dkj[x] += ds * qi[x];
                }
            }
        }
    }

    axpy(grad.wq, 1.0, matmul_tn(c.x0, dq));
    axpy(grad.wk, 1.0, matmul_tn(c.x0, dkt));
    axpy(grad.wv, 1.0, matmul_tn(c.x0, dv));
    axpy(dx0, 1.0, matmul_nt(dq, p.wq));
    axpy(dx0, 1.0, matmul_nt(dkt, p.wk));
    axpy(dx0, 1.0, matmul_nt(dv, p.wv));

    for (std::size_t t = 0; t < T; ++t) {
        const double* dxr = dx0.row(t);
        double* te = grad.tok_emb.row(static_cast<std::size_t>(c.inputs[t]));
        double* pe = grad.pos_emb.row(t);
        for (std::size_t j = 0; j < d; ++j) {
            te[j] += dxr[j];
            pe[j] += dxr[j];
        }
    }
    return c.loss;
}

inline NllResult nll_loss(const LmParams& params, const TokenSequence& seq) {
    NllResult r;
    r.grad = LmParams::zeros_like(params);
    r.loss = nll_loss_accumulate(params, seq, r.grad);
    return r;
}

struct DecodeConfig {
    double temperature = 1.0;
    std::size_t top_k = 20;
    std::size_t max_new_tokens = 24;
};

struct SampleResult {
    TokenSequence seq;       // prefix + generated tokens, EOS-terminated
    double loglik = 0.0;     // model log-likelihood of the sampled tokens
    std::size_t generated = 0;  // sampled tokens (counts a sampled EOS)
    bool eos_forced = false;    // hit the length limit before sampling EOS
    bool empty_text = false;    // produced no content tokens
};

namespace detail {

// Incremental decoder state: per-position K/V rows plus the feed-forward
// stack applied to one position at a time. Matches forward_full exactly
// because every sublayer is position-local apart from attention, which only
// looks backwards.
class IncrementalState {
  public:
    explicit IncrementalState(const LmParams& p) : p_(p) {
        const std::size_t d = p.config.d_model;
        kcache_ = Tensor::zeros(p.config.context_len, d);
        vcache_ = Tensor::zeros(p.config.context_len, d);
    }

    // Feeds token `id` at the next position and returns the logits row.
    std::vector<double> step(int id) {
        const std::size_t d = p_.config.d_model;
        const std::size_t H = p_.config.heads;
        const std::size_t dk = d / H;
        const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
        const std::size_t t = len_;

        std::vector<double> x0(d), q(d), o(d, 0.0);
        const double* te = p_.tok_emb.row(static_cast<std::size_t>(id));
        const double* pe = p_.pos_emb.row(t);
        for (std::size_t j = 0; j < d; ++j) x0[j] = te[j] + pe[j];

        double* krow = kcache_.row(t);
        double* vrow = vcache_.row(t);
        for (std::size_t j = 0; j < d; ++j) {
            double qj = 0.0, kj = 0.0, vj = 0.0;
            for (std::size_t x = 0; x < d; ++x) {
                qj += x0[x] * p_.wq.at(x, j);
                kj += x0[x] * p_.wk.at(x, j);
                vj += x0[x] * p_.wv.at(x, j);
            }
            q[j] = qj;
            krow[j] = kj;
            vrow[j] = vj;
        }

        for (std::size_t h = 0; h < H; ++h) {
            const std::size_t off = h * dk;
            std::vector<double> s(t + 1);
            double maxs = -1e300;
            for (std::size_t j = 0; j <= t; ++j) {
                const double* kj = kcache_.row(j) + off;
                double acc = 0.0;
                for (std::size_t x = 0; x < dk; ++x) acc += q[off + x] * kj[x];
                s[j] = acc * scale;
                maxs = std::max(maxs, s[j]);
            }
            double denom = 0.0;
            for (std::size_t j = 0; j <= t; ++j) {
                s[j] = std::exp(s[j] - maxs);
                denom += s[j];
            }
            for (std::size_t j = 0; j <= t; ++j) {
                const double a = s[j] / denom;
                const double* vj = vcache_.row(j) + off;
                for (std::size_t x = 0; x < dk; ++x) o[off + x] += a * vj[x];
            }
        }

        std::vector<double> r1(d);
        for (std::size_t j = 0; j < d; ++j) {
            double acc = 0.0;
            for (std::size_t x = 0; x < d; ++x) acc += o[x] * p_.wo.at(x, j);
            r1[j] = x0[j] + acc;
        }
        std::vector<double> x1 = norm_row(r1, p_.ln1_g, p_.ln1_b);

        const std::size_t dff = 4 * d;
        std::vector<double> h1(dff);
        for (std::size_t j = 0; j < dff; ++j) h1[j] = 0.0;
        for (std::size_t x = 0; x < d; ++x) {
            const double xv = x1[x];
            if (xv == 0.0) continue;
            const double* wrow = p_.w1.row(x);
            for (std::size_t j = 0; j < dff; ++j) h1[j] += xv * wrow[j];
        }
        std::vector<double> r2 = x1;
        for (std::size_t x = 0; x < dff; ++x) {
            const double hv = h1[x] > 0.0 ? h1[x] : 0.0;
            if (hv == 0.0) continue;
            const double* wrow = p_.w2.row(x);
            for (std::size_t j = 0; j < d; ++j) r2[j] += hv * wrow[j];
        }
        std::vector<double> x2 = norm_row(r2, p_.ln2_g, p_.ln2_b);

        std::vector<double> logits(p_.vocab, 0.0);
        for (std::size_t x = 0; x < d; ++x) {
            const double xv = x2[x];
            if (xv == 0.0) continue;
            const double* wrow = p_.wout.row(x);
            for (std::size_t j = 0; j < p_.vocab; ++j) logits[j] += xv * wrow[j];
        }

        ++len_;
        return logits;
    }

    std::size_t length() const { return len_; }

  private:
    static std::vector<double> norm_row(const std::vector<double>& x, const Tensor& g,
                                        const Tensor& b) {
        const std::size_t d = x.size();
        double mean = 0.0;
        for (double v : x) mean += v;
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (double v : x) var += (v - mean) * (v - mean);
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + kLnEps);
        std::vector<double> y(d);
        for (std::size_t j = 0; j < d; ++j) y[j] = g.at(j) * (x[j] - mean) * inv + b.at(j);
        return y;
    }

    const LmParams& p_;
    Tensor kcache_, vcache_;
    std::size_t len_ = 0;
};

inline double log_sum_exp(const std::vector<double>& v) {
    double m = v[0];
    for (double x : v) m = std::max(m, x);
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

}  // namespace detail

// Top-k temperature sampling from `prefix` (must start with BOS, no EOS)
// until EOS or the context limit. loglik is measured under the untempered
// model distribution, which is what candidate reranking scores.
inline SampleResult sample(const LmParams& params, const std::vector<int>& prefix,
                           const DecodeConfig& decode, std::uint64_t seed) {
    if (prefix.empty() || prefix.front() != kBosId)
        throw DataError("sampling prefix must start with BOS");
    if (decode.temperature <= 0.0) throw ConfigError("temperature must be > 0");
    if (decode.top_k == 0) throw ConfigError("top_k must be >= 1");
    if (prefix.size() + 2 > params.config.context_len)
        throw SequenceTooLong(prefix.size() + 2, params.config.context_len);

    Rng rng(seed);
    detail::IncrementalState state(params);
    std::vector<double> logits;
    for (int id : prefix) logits = state.step(id);

    SampleResult out;
    out.seq.ids = prefix;

    // Hard length budget: the final sequence always fits the context and
    // always ends with EOS (forced if the budget runs out first).
    const std::size_t max_total = std::min(
        params.config.context_len, prefix.size() + std::max<std::size_t>(1, decode.max_new_tokens) + 1);
    const std::size_t V = params.vocab;
    const std::size_t k = std::min<std::size_t>(decode.top_k, V);

    while (true) {
        // rank ids by (tempered logit desc, id asc); keep the top k
        std::vector<std::size_t> order(V);
        for (std::size_t i = 0; i < V; ++i) order[i] = i;
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                          order.end(), [&](std::size_t a, std::size_t b) {
                              if (logits[a] != logits[b]) return logits[a] > logits[b];
                              return a < b;
                          });

        std::size_t chosen;
        if (k == 1) {
            chosen = order[0];
        } else {
            std::vector<double> tempered(k);
            double maxl = -1e300;
            for (std::size_t i = 0; i < k; ++i) {
                tempered[i] = logits[order[i]] / decode.temperature;
                maxl = std::max(maxl, tempered[i]);
            }
            double denom = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                tempered[i] = std::exp(tempered[i] - maxl);
                denom += tempered[i];
            }
            double u = rng.next_double() * denom;
            std::size_t pick = k - 1;
            double acc = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                acc += tempered[i];
                if (u < acc) {
                    pick = i;
                    break;
                }
            }
            chosen = order[pick];
        }

        out.loglik += logits[chosen] - detail::log_sum_exp(logits);
        ++out.generated;
        out.seq.ids.push_back(static_cast<int>(chosen));
        if (chosen == static_cast<std::size_t>(kEosId)) break;
        if (out.seq.ids.size() + 2 > max_total) {
            out.seq.ids.push_back(kEosId);
            out.eos_forced = true;
            break;
        }
        logits = state.step(static_cast<int>(chosen));
    }

    std::size_t content = 0;
    for (std::size_t i = prefix.size(); i + 1 < out.seq.ids.size(); ++i)
        if (out.seq.ids[i] != kEosId) ++content;
    out.empty_text = content == 0;
    return out;
}

// ---- checkpoint io ----------------------------------------------------
// Flat little-endian container: magic, version, model dims, then named
// shaped double arrays in canonical order.

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    out.append(b, 4);
}
inline void put_u64(std::string& out, std::uint64_t v) {
    char b[8];
    std::memcpy(b, &v, 8);
    out.append(b, 8);
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;
    explicit Reader(const std::string& b) : buf(b) {}
    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw DataError("truncated checkpoint");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v;
        std::memcpy(&v, buf.data() + pos, 4);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v;
        std::memcpy(&v, buf.data() + pos, 8);
        pos += 8;
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace detail

inline constexpr char kLmMagic[8] = {'D', 'G', 'L', 'M', '0', '0', '0', '1'};

inline void save_checkpoint(const LmParams& params, const std::filesystem::path& path) {
    std::string out;
    out.append(kLmMagic, 8);
    detail::put_u32(out, static_cast<std::uint32_t>(params.config.d_model));
    detail::put_u32(out, static_cast<std::uint32_t>(params.config.heads));
    detail::put_u32(out, static_cast<std::uint32_t>(params.config.context_len));
    detail::put_u32(out, static_cast<std::uint32_t>(params.vocab));
    detail::put_u64(out, params.config.seed);
    std::uint32_t count = 0;
    params.for_each_tensor([&](const char*, const Tensor&) { ++count; });
    detail::put_u32(out, count);
    params.for_each_tensor([&](const char* name, const Tensor& t) {
        std::string n(name);
        detail::put_u32(out, static_cast<std::uint32_t>(n.size()));
        out += n;
        detail::put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
        for (std::size_t dim : t.shape) detail::put_u64(out, dim);
        const char* raw = reinterpret_cast<const char*>(t.data.data());
        out.append(raw, t.data.size() * sizeof(double));
    });
    write_file_atomic(path, out);
}

inline LmParams load_checkpoint(const std::filesystem::path& path) {
    const std::string buf = read_file(path);
    detail::Reader r(buf);
    if (r.bytes(8) != std::string(kLmMagic, 8)) throw DataError("bad checkpoint magic: " + path.string());
    LmConfig config;
    config.d_model = r.u32();
    config.heads = r.u32();
    config.context_len = r.u32();
    const std::size_t vocab = r.u32();
    config.seed = r.u64();
    LmParams p = LmParams::shaped(config, vocab);
    const std::uint32_t count = r.u32();
    std::uint32_t seen = 0;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = r.u32();
        const std::string name = r.bytes(name_len);
        const std::uint32_t ndim = r.u32();
        std::vector<std::size_t> shape(ndim);
        std::size_t total = 1;
        for (auto& dim : shape) {
            dim = r.u64();
            total *= dim;
        }
        bool matched = false;
        p.for_each_tensor([&](const char* n, Tensor& t) {
            if (matched || name != n) return;
            if (t.shape != shape) throw DataError("checkpoint shape mismatch for " + name);
            const std::string raw = r.bytes(total * sizeof(double));
            std::memcpy(t.data.data(), raw.data(), raw.size());
            matched = true;
        });
        if (!matched) throw DataError("unknown tensor in checkpoint: " + name);
        ++seen;
    }
    if (seen != count) throw DataError("checkpoint tensor count mismatch");
    return p;
}

}  // namespace descgen::textmodel
