#pragma once

#include "stylecap/corpus.hpp"
#include "stylecap/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace stylecap {

// High-style-intensity subsequence of a caption, original order preserved.
struct StylePhrase {
    std::vector<std::string> words;
};

struct StyleScore {
    double value = 0.0;  // in [0, 1]
    StyleLabel style;
};

// Embedding -> single-layer LSTM -> additive attention -> linear to K logits.
// Serves both as the phrase extractor's intensity source and as the style
// discriminator for the recheck filter.
struct AttnClassifierParams {
    nn::Embedding emb;      // embed_dim x vocab
    nn::Lstm lstm;          // hidden x embed_dim
    nn::Linear attn;        // hidden x hidden, score pre-activation
    nn::Linear attn_v;      // 1 x hidden, bias-free
    nn::Linear out;         // K x hidden
    int n_styles = 0;

    AttnClassifierParams() = default;
    AttnClassifierParams(int vocab, int embed_dim, int hidden, int k)
        : emb(embed_dim, vocab),
          lstm(hidden, embed_dim),
          attn(hidden, hidden),
          attn_v(1, hidden, /*bias=*/false),
          out(k, hidden),
          n_styles(k) {}

    void init(Rng& rng) {
        emb.init(rng);
        lstm.init(rng);
        attn.init(rng);
        attn_v.init(rng);
        out.init(rng);
    }

    void collect(std::vector<TensorRef>& refs) {
        emb.collect(refs, "attn_classifier.emb");
        lstm.collect(refs, "attn_classifier.lstm");
        attn.collect(refs, "attn_classifier.attn");
        attn_v.collect(refs, "attn_classifier.attn_v");
        out.collect(refs, "attn_classifier.out");
    }
};

struct AttnForward {
    std::vector<int> ids;
    nn::LstmTrace lstm;
    std::vector<Vec> tanh_a;  // per step, tanh of attention pre-activation
    Vec scores;
    Vec alpha;    // attention weights, sums to 1
    Vec context;
    Vec logits;
};

inline AttnForward attn_classifier_forward(const AttnClassifierParams& p,
                                           const std::vector<int>& ids) {
    if (ids.empty()) throw std::invalid_argument("attn_classifier_forward: empty caption");
    AttnForward f;
    f.ids = ids;
    std::vector<Vec> inputs;
    inputs.reserve(ids.size());
    for (int id : ids) inputs.push_back(p.emb.lookup(id));
    f.lstm = nn::lstm_forward(p.lstm, inputs);
    const std::size_t n = ids.size();
    f.scores.resize(n);
    f.tanh_a.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        f.tanh_a[t] = p.attn.forward(f.lstm.h[t]).array().tanh();
        f.scores[static_cast<Eigen::Index>(t)] = p.attn_v.forward(f.tanh_a[t])[0];
    }
    f.alpha = nn::softmax(f.scores);
    f.context = Vec::Zero(p.lstm.hidden_dim());
    for (std::size_t t = 0; t < n; ++t) f.context += f.alpha[static_cast<Eigen::Index>(t)] * f.lstm.h[t];
    f.logits = p.out.forward(f.context);
    return f;
}

inline void attn_classifier_backward(AttnClassifierParams& p, const AttnForward& f,
                                     const Vec& dlogits) {
    const std::size_t n = f.ids.size();
    Vec dcontext = p.out.backward(f.context, dlogits);
    std::vector<Vec> dh(n, Vec::Zero(p.lstm.hidden_dim()));
    Vec dalpha(n);
    for (std::size_t t = 0; t < n; ++t) {
        const auto ti = static_cast<Eigen::Index>(t);
        dalpha[ti] = f.lstm.h[t].dot(dcontext);
        dh[t] += f.alpha[ti] * dcontext;
    }
    // softmax backward
    const double dot = f.alpha.dot(dalpha);
    for (std::size_t t = 0; t < n; ++t) {
        const auto ti = static_cast<Eigen::Index>(t);
        const double dscore = f.alpha[ti] * (dalpha[ti] - dot);
        Vec dtanh = p.attn_v.backward(f.tanh_a[t], Vec::Constant(1, dscore));
        Vec da = dtanh.cwiseProduct((1.0 - f.tanh_a[t].array().square()).matrix());
        dh[t] += p.attn.backward(f.lstm.h[t], da);
    }
    std::vector<Vec> dx = nn::lstm_backward(p.lstm, f.lstm, dh);
    for (std::size_t t = 0; t < n; ++t) p.emb.accumulate(f.ids[t], dx[t]);
}

// Attention weights over the caption tokens; length equals caption length and
// the entries sum to 1.
inline Vec style_intensity(const StyledCaption& caption, const AttnClassifierParams& params,
                           const WordVocabulary& vocab) {
    auto f = attn_classifier_forward(params, vocab.encode_seq(caption.tokens));
    return f.alpha;
}

// Top ceil(ratio * len) tokens by intensity, returned in caption order. Ties
// break toward the earlier position.
inline StylePhrase extract_style_phrase(const StyledCaption& caption,
                                        const AttnClassifierParams& params,
                                        const WordVocabulary& vocab, double ratio) {
    if (ratio <= 0.0 || ratio > 1.0)
        throw std::invalid_argument("extract_style_phrase: ratio must be in (0, 1]");
    const Vec alpha = style_intensity(caption, params, vocab);
    const std::size_t len = caption.tokens.size();
    const auto k = static_cast<std::size_t>(
        std::ceil(ratio * static_cast<double>(len)) + 1e-12);
    std::vector<std::size_t> order(len);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return alpha[static_cast<Eigen::Index>(a)] > alpha[static_cast<Eigen::Index>(b)];
    });
    order.resize(std::min(k, len));
    std::sort(order.begin(), order.end());
    StylePhrase phrase;
    for (std::size_t i : order) phrase.words.push_back(caption.tokens[i]);
    return phrase;
}

// Softmax probability that `tokens` carries `target_style`.
inline StyleScore style_strength(const std::vector<std::string>& tokens,
                                 const StyleLabel& target_style,
                                 const AttnClassifierParams& params,
                                 const WordVocabulary& vocab) {
    auto f = attn_classifier_forward(params, vocab.encode_seq(tokens));
    Vec probs = nn::softmax(f.logits);
    if (target_style.id < 0 || target_style.id >= probs.size())
        throw std::out_of_range("style_strength: style id out of range");
    return {probs[target_style.id], target_style};
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------
struct ClassifierTrainConfig {
    int embed_dim = 512;
    int hidden_dim = 512;
    int epochs = 20;
    double lr = 1e-3;
    int batch_size = 16;
    std::uint64_t seed = 1;
    double val_fraction = 0.1;
};

inline double classifier_accuracy(const AttnClassifierParams& params,
                                  const std::vector<StyledCaption>& captions,
                                  const WordVocabulary& vocab) {
    if (captions.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& c : captions) {
        auto f = attn_classifier_forward(params, vocab.encode_seq(c.tokens));
        Eigen::Index argmax;
        f.logits.maxCoeff(&argmax);
        if (static_cast<int>(argmax) == c.style.id) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(captions.size());
}

inline AttnClassifierParams train_attn_classifier(const std::vector<StyledCaption>& captions,
                                                  const WordVocabulary& vocab,
                                                  const StyleSet& styles,
                                                  const ClassifierTrainConfig& cfg,
                                                  std::ostream* log = nullptr,
                                                  double* out_val_accuracy = nullptr) {
    std::set<int> present;
    for (const auto& c : captions) present.insert(c.style.id);
    if (present.size() < 2)
        throw std::invalid_argument("train_attn_classifier: need captions from >= 2 styles");

    AttnClassifierParams params(vocab.size(), cfg.embed_dim, cfg.hidden_dim, styles.size());
    Rng init_rng(mix_seed(cfg.seed, 0xC1A55));
    params.init(init_rng);

    std::vector<TensorRef> refs;
    params.collect(refs);
    nn::Adam opt(refs, cfg.lr);

    // deterministic train/val split
    std::vector<std::size_t> order(captions.size());
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng(mix_seed(cfg.seed, 0x5117));
    split_rng.shuffle(order);
    const auto n_val = static_cast<std::size_t>(cfg.val_fraction * static_cast<double>(order.size()));
    std::vector<std::size_t> val_idx(order.begin(), order.begin() + n_val);
    std::vector<std::size_t> train_idx(order.begin() + n_val, order.end());
    if (train_idx.empty()) throw std::invalid_argument("train_attn_classifier: empty train split");

    std::vector<StyledCaption> val;
    for (std::size_t i : val_idx) val.push_back(captions[i]);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(cfg.seed, 0xE90C + static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(train_idx);
        double total = 0.0;
        for (std::size_t at = 0; at < train_idx.size(); at += cfg.batch_size) {
            const std::size_t end = std::min(train_idx.size(), at + cfg.batch_size);
            zero_grads(refs);
            const double inv = 1.0 / static_cast<double>(end - at);
            for (std::size_t k = at; k < end; ++k) {
                const auto& c = captions[train_idx[k]];
                auto f = attn_classifier_forward(params, vocab.encode_seq(c.tokens));
                Vec dlogits;
                total += nn::cross_entropy_from_logits(f.logits, c.style.id, &dlogits);
                attn_classifier_backward(params, f, Vec(dlogits * inv));
            }
            opt.step();
        }
        if (log) {
            *log << "classifier epoch " << epoch + 1 << "/" << cfg.epochs
                 << " loss " << total / static_cast<double>(train_idx.size());
            if (!val.empty()) *log << " val_acc " << classifier_accuracy(params, val, vocab);
            *log << "\n";
        }
    }
    if (out_val_accuracy)
        *out_val_accuracy = val.empty() ? 1.0 : classifier_accuracy(params, val, vocab);
    return params;
}

}  // namespace stylecap
