#pragma once

#include "stylecap/corpus.hpp"

#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace stylecap::metrics {

using Tokens = std::vector<std::string>;

namespace detail {

inline std::string join(const Tokens& toks, std::size_t begin, std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) s += '\x1f';
        s += toks[begin + i];
    }
    return s;
}

inline std::map<std::string, long> ngram_counts(const Tokens& toks, int n) {
    std::map<std::string, long> counts;
    if (static_cast<int>(toks.size()) >= n)
        for (std::size_t i = 0; i + n <= toks.size(); ++i) ++counts[join(toks, i, n)];
    return counts;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Content accuracy
// ---------------------------------------------------------------------------

// Corpus-level BLEU-n: geometric mean of clipped 1..n-gram precisions with
// the brevity penalty, no smoothing.
inline double bleu(const std::vector<Tokens>& candidates,
                   const std::vector<std::vector<Tokens>>& references, int n) {
    if (n < 1 || n > 4) throw std::invalid_argument("bleu: n must be in 1..4");
    if (candidates.empty()) throw std::invalid_argument("bleu: empty corpus");
    if (candidates.size() != references.size())
        throw std::invalid_argument("bleu: candidate/reference count mismatch");
    std::vector<long> matched(n, 0), total(n, 0);
    long cand_len = 0, ref_len = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& cand = candidates[i];
        const auto& refs = references[i];
        if (refs.empty()) throw std::invalid_argument("bleu: image without references");
        cand_len += static_cast<long>(cand.size());
        // effective reference length: closest to candidate, shorter on a tie
        long best = static_cast<long>(refs[0].size());
        for (const auto& r : refs) {
            const long rl = static_cast<long>(r.size());
            const long c = static_cast<long>(cand.size());
            if (std::llabs(rl - c) < std::llabs(best - c) ||
                (std::llabs(rl - c) == std::llabs(best - c) && rl < best))
                best = rl;
        }
        ref_len += best;
        for (int k = 1; k <= n; ++k) {
            auto cc = detail::ngram_counts(cand, k);
            std::map<std::string, long> max_ref;
            for (const auto& r : refs)
                for (const auto& [g, c] : detail::ngram_counts(r, k))
                    max_ref[g] = std::max(max_ref[g], c);
            for (const auto& [g, c] : cc) {
                total[k - 1] += c;
                auto it = max_ref.find(g);
                if (it != max_ref.end()) matched[k - 1] += std::min(c, it->second);
            }
        }
    }
    double log_prec = 0.0;
    for (int k = 0; k < n; ++k) {
        if (total[k] == 0 || matched[k] == 0) return 0.0;
        log_prec += std::log(static_cast<double>(matched[k]) / static_cast<double>(total[k]));
    }
    log_prec /= n;
    const double bp =
        cand_len > ref_len
            ? 1.0
            : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
    return bp * std::exp(log_prec);
}

// CIDEr: mean over n = 1..4 of the average tf-idf cosine between candidate
// and references, averaged over images and scaled by 10. Document frequency
// counts images whose reference set contains the n-gram.
inline double cider(const std::vector<Tokens>& candidates,
                    const std::vector<std::vector<Tokens>>& references) {
    const std::size_t n_images = candidates.size();
    if (n_images < 2) throw std::invalid_argument("cider: need >= 2 images for idf");
    if (references.size() != n_images)
        throw std::invalid_argument("cider: candidate/reference count mismatch");

    std::array<std::unordered_map<std::string, long>, 4> df;
    for (const auto& refs : references) {
        for (int k = 1; k <= 4; ++k) {
            std::unordered_map<std::string, bool> seen;
            for (const auto& r : refs)
                for (const auto& [g, c] : detail::ngram_counts(r, k)) seen[g] = true;
            for (const auto& [g, _] : seen) ++df[k - 1][g];
        }
    }
    const double log_n = std::log(static_cast<double>(n_images));
    auto idf = [&](int k, const std::string& g) {
        auto it = df[k - 1].find(g);
        const double d = it == df[k - 1].end() ? 1.0 : static_cast<double>(std::max(1L, it->second));
        return log_n - std::log(d);
    };
    auto tfidf = [&](const Tokens& toks, int k) {
        std::map<std::string, double> v;
        for (const auto& [g, c] : detail::ngram_counts(toks, k))
            v[g] = static_cast<double>(c) * idf(k, g);
        return v;
    };
    auto cosine = [](const std::map<std::string, double>& a,
                     const std::map<std::string, double>& b) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (const auto& [g, x] : a) {
            na += x * x;
            auto it = b.find(g);
            if (it != b.end()) dot += x * it->second;
        }
        for (const auto& [g, x] : b) nb += x * x;
        if (na == 0.0 || nb == 0.0) return 0.0;
        return dot / (std::sqrt(na) * std::sqrt(nb));
    };

    double score = 0.0;
    for (std::size_t i = 0; i < n_images; ++i) {
        const auto& refs = references[i];
        if (refs.empty()) throw std::invalid_argument("cider: image without references");
        double per_image = 0.0;
        for (int k = 1; k <= 4; ++k) {
            auto cv = tfidf(candidates[i], k);
            double sum = 0.0;
            for (const auto& r : refs) sum += cosine(cv, tfidf(r, k));
            per_image += sum / static_cast<double>(refs.size());
        }
        score += per_image / 4.0;
    }
    return 10.0 * score / static_cast<double>(n_images);
}

// ---------------------------------------------------------------------------
// Style accuracy: interpolated trigram language model + perplexity
// ---------------------------------------------------------------------------

// Jelinek-Mercer interpolation of maximum-likelihood trigram/bigram estimates
// with an add-one-smoothed unigram floor. When a higher-order context is
// unseen the estimate falls back to the next order down, which keeps every
// conditional distribution normalized.
class TrigramLM {
public:
    static constexpr const char* kBos = "<s>";
    static constexpr const char* kEos = "</s>";
    static constexpr const char* kUnk = "<unk>";

    TrigramLM() = default;
    TrigramLM(double w1, double w2, double w3) { set_weights(w1, w2, w3); }

    void set_weights(double w1, double w2, double w3) {
        if (w1 < 0 || w2 < 0 || w3 < 0 || std::abs(w1 + w2 + w3 - 1.0) > 1e-12)
            throw std::invalid_argument("TrigramLM: weights must be >= 0 and sum to 1");
        w1_ = w1;
        w2_ = w2;
        w3_ = w3;
    }

    void add_sentence(const Tokens& toks) {
        std::vector<std::string> seq;
        seq.reserve(toks.size() + 3);
        seq.push_back(kBos);
        seq.push_back(kBos);
        for (const auto& t : toks) seq.push_back(t);
        seq.push_back(kEos);
        for (std::size_t i = 2; i < seq.size(); ++i) {
            vocab_.insert(seq[i]);
            ++uni_[seq[i]];
            ++uni_total_;
            ++bi_[seq[i - 1] + sep() + seq[i]];
            ++bi_ctx_[seq[i - 1]];
            ++tri_[seq[i - 2] + sep() + seq[i - 1] + sep() + seq[i]];
            ++tri_ctx_[seq[i - 2] + sep() + seq[i - 1]];
        }
    }

    // Registers a word without observing it; with zero counts the smoothed
    // unigram floor is exactly uniform over the registered vocabulary + unk.
    void add_vocab_word(const std::string& w) { vocab_.insert(w); }

    // Conditional probability with unknown words mapped to <unk>.
    double prob(const std::string& w2_ctx, const std::string& w1_ctx,
                const std::string& word) const {
        if (vocab_.empty()) throw std::logic_error("TrigramLM: empty model");
        const std::string w = map(word);
        const std::string c1 = map_ctx(w1_ctx);
        const std::string c2 = map_ctx(w2_ctx);
        return w3_ * p3(c2, c1, w) + w2_ * p2(c1, w) + w1_ * p1(w);
    }

    int vocab_size() const { return static_cast<int>(vocab_.size()) + 1; }  // + <unk>

    const std::set<std::string>& vocab() const { return vocab_; }

    double w1() const { return w1_; }
    double w2() const { return w2_; }
    double w3() const { return w3_; }

private:
    static std::string sep() { return "\x1f"; }

    std::string map(const std::string& w) const { return vocab_.count(w) ? w : kUnk; }
    std::string map_ctx(const std::string& w) const {
        return (w == kBos || vocab_.count(w)) ? w : kUnk;
    }

    // add-one smoothed unigram over vocab + <unk>
    double p1(const std::string& w) const {
        const long c = w == kUnk ? 0 : at(uni_, w);
        return (static_cast<double>(c) + 1.0) /
               (static_cast<double>(uni_total_) + static_cast<double>(vocab_size()));
    }

    double p2(const std::string& c1, const std::string& w) const {
        const long ctx = at(bi_ctx_, c1);
        if (ctx == 0) return p1(w);
        return static_cast<double>(at(bi_, c1 + sep() + w)) / static_cast<double>(ctx);
    }

    double p3(const std::string& c2, const std::string& c1, const std::string& w) const {
        const long ctx = at(tri_ctx_, c2 + sep() + c1);
        if (ctx == 0) return p2(c1, w);
        return static_cast<double>(at(tri_, c2 + sep() + c1 + sep() + w)) /
               static_cast<double>(ctx);
    }

    static long at(const std::unordered_map<std::string, long>& m, const std::string& k) {
        auto it = m.find(k);
        return it == m.end() ? 0 : it->second;
    }

    double w1_ = 0.2, w2_ = 0.3, w3_ = 0.5;
    std::unordered_map<std::string, long> uni_, bi_, tri_, bi_ctx_, tri_ctx_;
    std::set<std::string> vocab_;
    long uni_total_ = 0;
};

inline TrigramLM train_trigram_lm(const std::vector<Tokens>& corpus, double w1 = 0.2,
                                  double w2 = 0.3, double w3 = 0.5) {
    if (corpus.empty()) throw std::invalid_argument("train_trigram_lm: empty corpus");
    TrigramLM lm(w1, w2, w3);
    for (const auto& s : corpus) lm.add_sentence(s);
    return lm;
}

// exp of the average negative log-likelihood per token, eos included.
inline double perplexity(const TrigramLM& lm, const std::vector<Tokens>& captions) {
    double nll = 0.0;
    long n_tokens = 0;
    for (const auto& toks : captions) {
        std::vector<std::string> seq;
        seq.push_back(TrigramLM::kBos);
        seq.push_back(TrigramLM::kBos);
        for (const auto& t : toks) seq.push_back(t);
        seq.push_back(TrigramLM::kEos);
        for (std::size_t i = 2; i < seq.size(); ++i) {
            nll -= std::log(lm.prob(seq[i - 2], seq[i - 1], seq[i]));
            ++n_tokens;
        }
    }
    if (n_tokens == 0) throw std::invalid_argument("perplexity: no tokens");
    return std::exp(nll / static_cast<double>(n_tokens));
}

// ---------------------------------------------------------------------------
// Style accuracy: bag-of-words logistic regression, one binary classifier per
// style (style vs. rest)
// ---------------------------------------------------------------------------
class EvalStyleClassifier {
public:
    // feature space: presence of each vocabulary word + bias
    void train(const std::vector<StyledCaption>& captions, int n_styles, int iterations = 300,
               double lr = 0.5, double l2 = 1e-4) {
        if (captions.empty()) throw std::invalid_argument("EvalStyleClassifier: empty corpus");
        vocab_.clear();
        for (const auto& c : captions)
            for (const auto& t : c.tokens) vocab_.emplace(t, 0);
        int idx = 0;
        for (auto& [w, i] : vocab_) i = idx++;
        n_styles_ = n_styles;
        weights_.assign(n_styles, Vec::Zero(idx + 1));

        std::vector<std::vector<int>> feats;
        feats.reserve(captions.size());
        for (const auto& c : captions) feats.push_back(featurize(c.tokens));

        const double inv = 1.0 / static_cast<double>(captions.size());
        for (int s = 0; s < n_styles; ++s) {
            Vec& w = weights_[s];
            for (int it = 0; it < iterations; ++it) {
                Vec grad = l2 * w;
                for (std::size_t i = 0; i < captions.size(); ++i) {
                    const double y = captions[i].style.id == s ? 1.0 : 0.0;
                    double m = w[w.size() - 1];
                    for (int f : feats[i]) m += w[f];
                    const double p = 1.0 / (1.0 + std::exp(-m));
                    const double d = (p - y) * inv;
                    for (int f : feats[i]) grad[f] += d;
                    grad[w.size() - 1] += d;
                }
                w -= lr * grad;
            }
        }
    }

    // true iff the binary classifier for `style_id` fires
    bool fires(const Tokens& tokens, int style_id) const {
        return margin(tokens, style_id) > 0.0;
    }

    double margin(const Tokens& tokens, int style_id) const {
        if (style_id < 0 || style_id >= n_styles_)
            throw std::out_of_range("EvalStyleClassifier: style id");
        const Vec& w = weights_[style_id];
        double m = w[w.size() - 1];
        for (int f : featurize(tokens)) m += w[f];
        return m;
    }

    int n_styles() const { return n_styles_; }

private:
    std::vector<int> featurize(const Tokens& tokens) const {
        std::set<int> present;
        for (const auto& t : tokens) {
            auto it = vocab_.find(t);
            if (it != vocab_.end()) present.insert(it->second);
        }
        return {present.begin(), present.end()};
    }

    std::map<std::string, int> vocab_;
    std::vector<Vec> weights_;
    int n_styles_ = 0;
};

// Fraction of captions whose intended style's binary classifier fires.
inline double cls_accuracy(const std::vector<std::pair<Tokens, int>>& captions_with_styles,
                           const EvalStyleClassifier& clf) {
    if (captions_with_styles.empty()) throw std::invalid_argument("cls_accuracy: empty input");
    std::size_t hit = 0;
    for (const auto& [toks, style] : captions_with_styles)
        if (clf.fires(toks, style)) ++hit;
    return static_cast<double>(hit) / static_cast<double>(captions_with_styles.size());
}

// ---------------------------------------------------------------------------
// Diversity over style phrases
// ---------------------------------------------------------------------------
using PhraseSet = std::vector<Tokens>;  // multiset; order irrelevant

inline long distinct_count(const PhraseSet& phrases) {
    std::set<Tokens> uniq(phrases.begin(), phrases.end());
    return static_cast<long>(uniq.size());
}

inline double distinct_ratio(const PhraseSet& phrases) {
    if (phrases.empty()) throw std::invalid_argument("distinct_ratio: empty phrase set");
    return static_cast<double>(distinct_count(phrases)) / static_cast<double>(phrases.size());
}

// Entropy (bits) of the word-frequency distribution over all phrase tokens.
inline double word_entropy(const PhraseSet& phrases) {
    if (phrases.empty()) throw std::invalid_argument("word_entropy: empty phrase set");
    std::map<std::string, long> counts;
    long total = 0;
    for (const auto& p : phrases)
        for (const auto& w : p) {
            ++counts[w];
            ++total;
        }
    if (total == 0) throw std::invalid_argument("word_entropy: no tokens");
    double h = 0.0;
    for (const auto& [w, c] : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log2(p);
    }
    return h;
}

// Unique n-grams across all phrases / total n-gram tokens.
inline double div_n(const PhraseSet& phrases, int n) {
    if (n < 1) throw std::invalid_argument("div_n: n must be >= 1");
    std::set<std::string> uniq;
    long total = 0;
    for (const auto& p : phrases)
        for (const auto& [g, c] : detail::ngram_counts(p, n)) {
            uniq.insert(g);
            total += c;
        }
    if (total == 0) throw std::invalid_argument("div_n: no phrase has length >= n");
    return static_cast<double>(uniq.size()) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Per-scene diversity report
// ---------------------------------------------------------------------------
struct SceneRow {
    std::string scene;
    std::size_t n_samples = 0;
    bool included = false;  // scenes with < 10 samples are excluded
    double distinct_ratio = 0.0;
    double word_entropy = 0.0;
};

constexpr std::size_t kSceneMinSamples = 10;

// Diversity of extracted style phrases grouped by scene keyword.
// `phrases_by_scene` maps each scene to the phrases extracted from the
// captions of that scene.
inline std::vector<SceneRow> scene_diversity_report(
    const std::map<std::string, PhraseSet>& phrases_by_scene) {
    std::vector<SceneRow> rows;
    for (const auto& [scene, phrases] : phrases_by_scene) {
        SceneRow row;
        row.scene = scene;
        row.n_samples = phrases.size();
        if (phrases.size() >= kSceneMinSamples) {
            row.included = true;
            row.distinct_ratio = distinct_ratio(phrases);
            row.word_entropy = word_entropy(phrases);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace stylecap::metrics
