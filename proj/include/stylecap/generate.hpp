#pragma once

#include "stylecap/cvae.hpp"

namespace stylecap {

struct RecheckConfig {
    double threshold = 0.9;       // style strength a candidate must clear
    int n_candidates = 10;
    int max_reject_attempts = 100;

    static RecheckConfig from_config(const RunConfig& c) {
        return {c.recheck_threshold, c.n_candidates, c.max_reject_attempts};
    }
};

struct Candidate {
    std::vector<std::string> tokens;
    LatentSample z;
    StyleScore score;
    int rejects = 0;  // prior draws discarded before this latent was accepted
};

// Order = generation order; the recheck scan runs forward over it.
using CandidateSet = std::vector<Candidate>;

// Draw z ~ N(mu_k, I) until the latent style classifier picks the target
// style. After max_reject_attempts failures the best draw so far (highest
// target-style probability) is returned, so the call always terminates.
inline LatentSample reject_sample_latent(const AlignedFeature& feature, const StyleLabel& style,
                                         const PriorParams& prior,
                                         const LatentStyleClassifierParams& cs,
                                         const RecheckConfig& cfg, Rng& rng,
                                         int* out_rejects = nullptr) {
    if (cfg.max_reject_attempts < 1)
        throw std::invalid_argument("reject_sample_latent: max_reject_attempts must be positive");
    GaussianParams g = prior_mean(feature, prior);
    Vec best_z;
    double best_p = -1.0;
    for (int attempt = 0; attempt < cfg.max_reject_attempts; ++attempt) {
        LatentSample s = reparameterize(g, rng, LatentSample::Origin::prior);
        Vec probs = nn::softmax(cs.lin.forward(s.z));
        Eigen::Index argmax;
        probs.maxCoeff(&argmax);
        if (static_cast<int>(argmax) == style.id) {
            if (out_rejects) *out_rejects = attempt;
            return s;
        }
        if (probs[style.id] > best_p) {
            best_p = probs[style.id];
            best_z = s.z;
        }
    }
    if (out_rejects) *out_rejects = cfg.max_reject_attempts;
    return {best_z, LatentSample::Origin::prior};
}

// Greedy argmax decoding: conditioning inputs, then bos, then feed back each
// argmax token until eos or max_len tokens.
inline std::vector<std::string> decode_greedy(const AlignedFeature& feature,
                                              const StyleLabel& style, const LatentSample& z,
                                              const DecoderParams& params,
                                              const WordVocabulary& vocab, int max_len) {
    if (max_len < 1) throw std::invalid_argument("decode_greedy: max_len must be >= 1");
    const Eigen::Index hd = params.lstm.hidden_dim();
    Vec h = Vec::Zero(hd), c = Vec::Zero(hd);
    auto step = [&](const Vec& x) {
        Vec a = params.lstm.wx * x + params.lstm.wh * h + params.lstm.b;
        Vec gi(hd), gf(hd), gg(hd), go(hd);
        for (Eigen::Index k = 0; k < hd; ++k) {
            gi[k] = nn::sigmoid(a[k]);
            gf[k] = nn::sigmoid(a[hd + k]);
            gg[k] = std::tanh(a[2 * hd + k]);
            go[k] = nn::sigmoid(a[3 * hd + k]);
        }
        c = gf.cwiseProduct(c) + gi.cwiseProduct(gg);
        h = go.cwiseProduct(Vec(c.array().tanh().matrix()));
    };
    step(feature.vector);
    step(params.w_s.lookup(style.id));
    step(params.latent_proj.forward(z.z));
    std::vector<std::string> tokens;
    int prev = WordVocabulary::kBos;
    for (int t = 0; t < max_len; ++t) {
        step(params.w_d.lookup(prev));
        Vec logits = params.out.forward(h);
        Eigen::Index argmax;
        logits.maxCoeff(&argmax);
        const int next = static_cast<int>(argmax);
        if (next == WordVocabulary::kEos) break;
        tokens.push_back(vocab.decode(next));
        prev = next;
    }
    return tokens;
}

// n_candidates captions, each decoded from an independently reject-sampled
// latent and scored with the style discriminator. Per-candidate sub-seeds are
// derived from `seed`, so the set is a pure function of its inputs.
inline CandidateSet generate_candidates(const AlignedFeature& feature, const StyleLabel& style,
                                        const Model& model, const AttnClassifierParams& classifier,
                                        const WordVocabulary& vocab, const RecheckConfig& cfg,
                                        std::uint64_t seed) {
    if (cfg.n_candidates < 1)
        throw std::invalid_argument("generate_candidates: n_candidates must be positive");
    CandidateSet set;
    set.reserve(cfg.n_candidates);
    for (int k = 0; k < cfg.n_candidates; ++k) {
        Rng rng(mix_seed(seed, 0xCAFE0 + static_cast<std::uint64_t>(k)));
        Candidate cand;
        cand.z = reject_sample_latent(feature, style, model.prior, model.cs, cfg, rng,
                                      &cand.rejects);
        cand.tokens =
            decode_greedy(feature, style, cand.z, model.dec, vocab, model.config().max_len);
        cand.score = cand.tokens.empty()
                         ? StyleScore{0.0, style}
                         : style_strength(cand.tokens, style, classifier, vocab);
        set.push_back(std::move(cand));
    }
    return set;
}

// First candidate in generation order whose style strength clears the
// threshold; if none qualifies, the highest-scoring candidate (earliest on a
// tie).
inline const Candidate& recheck_filter(const CandidateSet& candidates, const RecheckConfig& cfg) {
    if (candidates.empty()) throw std::invalid_argument("recheck_filter: empty candidate set");
    for (const auto& c : candidates)
        if (c.score.value >= cfg.threshold) return c;
    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i)
        if (candidates[i].score.value > candidates[best].score.value) best = i;
    return candidates[best];
}

struct Generation {
    std::vector<std::string> tokens;
    double style_score = 0.0;
    int total_rejects = 0;  // prior draws discarded across all candidates
};

// End-to-end inference for one image: candidates, then the recheck filter
// (or the first candidate unconditionally when the ablation disables it).
inline Generation generate_stylized(const AlignedFeature& feature, const StyleLabel& style,
                                    const Model& model, const AttnClassifierParams& classifier,
                                    const WordVocabulary& vocab, const RecheckConfig& cfg,
                                    std::uint64_t seed, bool disable_recheck = false) {
    CandidateSet set = generate_candidates(feature, style, model, classifier, vocab, cfg, seed);
    const Candidate& chosen = disable_recheck ? set.front() : recheck_filter(set, cfg);
    Generation g;
    g.tokens = chosen.tokens;
    g.style_score = chosen.score.value;
    for (const auto& c : set) g.total_rejects += c.rejects;
    return g;
}

}  // namespace stylecap
