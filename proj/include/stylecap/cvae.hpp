#pragma once

#include "stylecap/config.hpp"
#include "stylecap/embed.hpp"
#include "stylecap/phrase.hpp"

#include <optional>

namespace stylecap {

// ---------------------------------------------------------------------------
// Latent-space types
// ---------------------------------------------------------------------------
struct GaussianParams {
    Vec mean;
    Vec log_var;
};

struct LatentSample {
    Vec z;
    enum class Origin { posterior, prior } origin = Origin::posterior;
};

constexpr double kLogVarClamp = 10.0;  // exp overflow guard

// ---------------------------------------------------------------------------
// Parameter groups
// ---------------------------------------------------------------------------
struct EncoderParams {
    nn::Embedding w_e;      // style-phrase embedding
    nn::Lstm lstm;
    nn::Linear mu_head;     // latent x hidden
    nn::Linear logvar_head;

    void collect(std::vector<TensorRef>& refs) {
        w_e.collect(refs, "encoder.w_e");
        lstm.collect(refs, "encoder.lstm");
        mu_head.collect(refs, "encoder.mu_head");
        logvar_head.collect(refs, "encoder.logvar_head");
    }
};

struct DecoderParams {
    nn::Embedding w_d;      // caption embedding
    nn::Embedding w_s;      // style-label embedding, one column per style
    nn::Linear latent_proj; // multimodal x latent
    nn::Lstm lstm;
    nn::Linear out;         // vocab x hidden

    void collect(std::vector<TensorRef>& refs) {
        w_d.collect(refs, "decoder.w_d");
        w_s.collect(refs, "decoder.w_s");
        latent_proj.collect(refs, "decoder.latent_proj");
        lstm.collect(refs, "decoder.lstm");
        out.collect(refs, "decoder.out");
    }
};

// Conditional prior N(mu_k, I); the mean is a linear map of the aligned
// feature, the variance is fixed.
struct PriorParams {
    nn::Linear proj;  // latent x multimodal

    void collect(std::vector<TensorRef>& refs) { proj.collect(refs, "prior"); }
};

struct LatentStyleClassifierParams {
    nn::Linear lin;  // K x latent

    void collect(std::vector<TensorRef>& refs) { lin.collect(refs, "latent_classifier"); }
};

// ---------------------------------------------------------------------------
// Core operations
// ---------------------------------------------------------------------------
struct EncoderTrace {
    std::vector<int> ids;       // bos + phrase + eos
    nn::LstmTrace lstm;
    Vec logvar_raw;             // pre-clamp, for the clamp mask
    GaussianParams g;
};

inline Vec clamp_log_var(const Vec& raw) {
    return raw.cwiseMax(-kLogVarClamp).cwiseMin(kLogVarClamp);
}

inline EncoderTrace encode_posterior_trace(const std::vector<int>& phrase_ids,
                                           const EncoderParams& params) {
    EncoderTrace t;
    t.ids.reserve(phrase_ids.size() + 2);
    t.ids.push_back(WordVocabulary::kBos);
    t.ids.insert(t.ids.end(), phrase_ids.begin(), phrase_ids.end());
    t.ids.push_back(WordVocabulary::kEos);
    std::vector<Vec> inputs;
    inputs.reserve(t.ids.size());
    for (int id : t.ids) inputs.push_back(params.w_e.lookup(id));
    t.lstm = nn::lstm_forward(params.lstm, inputs);
    const Vec& h_n = t.lstm.last_h();
    t.g.mean = params.mu_head.forward(h_n);
    t.logvar_raw = params.logvar_head.forward(h_n);
    t.g.log_var = clamp_log_var(t.logvar_raw);
    return t;
}

// Posterior Gaussian from a style phrase; the empty phrase maps to the
// bos/eos-only input sequence.
inline GaussianParams encode_posterior(const std::vector<int>& phrase_ids,
                                       const EncoderParams& params) {
    return encode_posterior_trace(phrase_ids, params).g;
}

inline GaussianParams encode_posterior(const StylePhrase& phrase, const WordVocabulary& vocab,
                                       const EncoderParams& params) {
    return encode_posterior(vocab.encode_seq(phrase.words), params);
}

// Accumulates encoder gradients given dL/dmu and dL/dlog_var.
inline void encode_posterior_backward(const EncoderTrace& t, const Vec& dmu, const Vec& dlogvar,
                                      EncoderParams& params) {
    // clamp: zero gradient outside the active range
    Vec dlv = dlogvar;
    for (Eigen::Index i = 0; i < dlv.size(); ++i)
        if (std::abs(t.logvar_raw[i]) >= kLogVarClamp) dlv[i] = 0.0;
    const Vec& h_n = t.lstm.last_h();
    Vec dh = params.mu_head.backward(h_n, dmu) + params.logvar_head.backward(h_n, dlv);
    std::vector<Vec> dh_steps(t.lstm.steps(), Vec::Zero(params.lstm.hidden_dim()));
    dh_steps.back() = dh;
    std::vector<Vec> dx = nn::lstm_backward(params.lstm, t.lstm, dh_steps);
    for (std::size_t s = 0; s < t.ids.size(); ++s) params.w_e.accumulate(t.ids[s], dx[s]);
}

inline GaussianParams prior_mean(const AlignedFeature& feature, const PriorParams& params) {
    GaussianParams g;
    g.mean = params.proj.forward(feature.vector);
    g.log_var = Vec::Zero(g.mean.size());
    return g;
}

inline LatentSample reparameterize(const GaussianParams& g, const Vec& noise,
                                   LatentSample::Origin origin = LatentSample::Origin::posterior) {
    if (noise.size() != g.mean.size())
        throw std::invalid_argument("reparameterize: noise size mismatch");
    return {g.mean + (g.log_var.array() / 2.0).exp().matrix().cwiseProduct(noise), origin};
}

inline LatentSample reparameterize(const GaussianParams& g, Rng& rng,
                                   LatentSample::Origin origin = LatentSample::Origin::posterior) {
    return reparameterize(g, rng.normal_vec(g.mean.size()), origin);
}

// KL(q || p) for diagonal-Gaussian q and unit-variance p, summed over
// dimensions:  sum_d [ -log sigma_d + (sigma_d^2 + (mu_d - muk_d)^2)/2 - 1/2 ].
inline double kl_divergence(const GaussianParams& posterior, const GaussianParams& prior) {
    if (posterior.mean.size() != prior.mean.size())
        throw std::invalid_argument("kl_divergence: dimension mismatch");
    if ((prior.log_var.array() != 0.0).any())
        throw std::invalid_argument("kl_divergence: prior must have unit variance");
    double kl = 0.0;
    for (Eigen::Index i = 0; i < posterior.mean.size(); ++i) {
        const double lv = posterior.log_var[i];
        const double d = posterior.mean[i] - prior.mean[i];
        kl += -0.5 * lv + 0.5 * (std::exp(lv) + d * d) - 0.5;
    }
    return kl;
}

// ---------------------------------------------------------------------------
// Decoder
// ---------------------------------------------------------------------------
struct DecoderTrace {
    std::vector<Vec> inputs;
    std::vector<int> token_ids;     // ids fed through w_d (bos + target)
    nn::LstmTrace lstm;
    std::vector<Vec> logps;         // one per supervised step
    int style_id = 0;
    Vec z;                          // latent fed through latent_proj
};

// Conditioning occupies the first three steps (feature, style embedding,
// projected latent) and is unsupervised; prediction starts at the step that
// consumes bos and runs through the eos target.
inline DecoderTrace decode_teacher_forced_trace(const AlignedFeature& feature,
                                                const StyleLabel& style, const LatentSample& z,
                                                const std::vector<int>& target_ids,
                                                const DecoderParams& params) {
    DecoderTrace t;
    t.style_id = style.id;
    t.z = z.z;
    t.token_ids.push_back(WordVocabulary::kBos);
    t.token_ids.insert(t.token_ids.end(), target_ids.begin(), target_ids.end());
    t.inputs.push_back(feature.vector);
    t.inputs.push_back(params.w_s.lookup(style.id));
    t.inputs.push_back(params.latent_proj.forward(z.z));
    for (int id : t.token_ids) t.inputs.push_back(params.w_d.lookup(id));
    t.lstm = nn::lstm_forward(params.lstm, t.inputs);
    const std::size_t n_sup = target_ids.size() + 1;  // targets + eos
    t.logps.reserve(n_sup);
    for (std::size_t k = 0; k < n_sup; ++k)
        t.logps.push_back(nn::log_softmax(params.out.forward(t.lstm.h[3 + k])));
    return t;
}

inline std::vector<Vec> decode_teacher_forced(const AlignedFeature& feature,
                                              const StyleLabel& style, const LatentSample& z,
                                              const std::vector<int>& target_ids,
                                              const DecoderParams& params) {
    return decode_teacher_forced_trace(feature, style, z, target_ids, params).logps;
}

// Negative sum of target log-probabilities, eos included. `logps` must hold
// exactly len(target) + 1 steps.
inline double cross_entropy_loss(const std::vector<Vec>& logps,
                                 const std::vector<int>& target_ids) {
    if (logps.size() != target_ids.size() + 1)
        throw std::invalid_argument("cross_entropy_loss: expected " +
                                    std::to_string(target_ids.size() + 1) + " steps, got " +
                                    std::to_string(logps.size()));
    double loss = 0.0;
    for (std::size_t k = 0; k < logps.size(); ++k) {
        const int tgt = k < target_ids.size() ? target_ids[k] : WordVocabulary::kEos;
        if (tgt < 0 || tgt >= logps[k].size())
            throw std::invalid_argument("cross_entropy_loss: target id out of range");
        loss -= logps[k][tgt];
    }
    return loss;
}

// Backward for the teacher-forced CE path. `scale` multiplies the upstream
// gradient; returns dL/dz and dL/dfeature and accumulates everything else.
struct DecoderGrads {
    Vec dz;
    Vec dfeature;
};

inline DecoderGrads decode_ce_backward(const DecoderTrace& t, const std::vector<int>& target_ids,
                                       double scale, DecoderParams& params) {
    const std::size_t n_steps = t.lstm.steps();
    std::vector<Vec> dh(n_steps, Vec::Zero(params.lstm.hidden_dim()));
    for (std::size_t k = 0; k < t.logps.size(); ++k) {
        const int tgt = k < target_ids.size() ? target_ids[k] : WordVocabulary::kEos;
        Vec dlogits = t.logps[k].array().exp();
        dlogits[tgt] -= 1.0;
        dlogits *= scale;
        dh[3 + k] = params.out.backward(t.lstm.h[3 + k], dlogits);
    }
    std::vector<Vec> dx = nn::lstm_backward(params.lstm, t.lstm, dh);
    DecoderGrads g;
    g.dfeature = dx[0];
    params.w_s.accumulate(t.style_id, dx[1]);
    g.dz = params.latent_proj.backward(t.z, dx[2]);
    for (std::size_t k = 0; k < t.token_ids.size(); ++k)
        params.w_d.accumulate(t.token_ids[k], dx[3 + k]);
    return g;
}

// -log softmax(W z + b)[style]
inline double style_classifier_loss(const LatentSample& z, const StyleLabel& style,
                                    const LatentStyleClassifierParams& params) {
    return nn::cross_entropy_from_logits(params.lin.forward(z.z), style.id);
}

// ---------------------------------------------------------------------------
// Assembled model
// ---------------------------------------------------------------------------
class Model {
public:
    Model() = default;
    Model(const RunConfig& cfg, int vocab_size, int n_styles) { build(cfg, vocab_size, n_styles); }

    void build(const RunConfig& cfg, int vocab_size, int n_styles) {
        cfg_ = cfg;
        vocab_size_ = vocab_size;
        n_styles_ = n_styles;
        const int m = cfg.multimodal_dim;
        const int h = cfg.hidden_dim;
        const int l = cfg.latent_dim;
        img_enc.proj.resize(m, cfg.image_feature_dim);
        obj_enc.proj.resize(m, m);
        if (!cfg.share_object_embedding) {
            obj_table.emplace(m, vocab_size);
        } else {
            obj_table.reset();
        }
        enc.w_e.resize(m, vocab_size);
        enc.lstm.resize(h, m);
        enc.mu_head.resize(l, h);
        enc.logvar_head.resize(l, h);
        dec.w_d.resize(m, vocab_size);
        dec.w_s.resize(m, n_styles);
        dec.latent_proj.resize(m, l);
        dec.lstm.resize(h, m);
        dec.out.resize(vocab_size, h);
        prior.proj.resize(l, m);
        cs.lin.resize(n_styles, l);
    }

    void init(Rng& rng) {
        img_enc.proj.init(rng);
        obj_enc.proj.init(rng);
        if (obj_table) obj_table->init(rng);
        enc.w_e.init(rng);
        enc.lstm.init(rng);
        enc.mu_head.init(rng);
        enc.logvar_head.init(rng);
        dec.w_d.init(rng);
        dec.w_s.init(rng);
        dec.latent_proj.init(rng);
        dec.lstm.init(rng);
        dec.out.init(rng);
        prior.proj.init(rng);
        cs.lin.init(rng);
    }

    std::vector<TensorRef> collect() {
        std::vector<TensorRef> refs;
        img_enc.collect(refs);
        obj_enc.collect(refs);
        if (obj_table) obj_table->collect(refs, "object_table");
        enc.collect(refs);
        dec.collect(refs);
        prior.collect(refs);
        cs.collect(refs);
        return refs;
    }

    const nn::Embedding& object_table() const { return obj_table ? *obj_table : dec.w_d; }
    nn::Embedding& object_table_mut() { return obj_table ? *obj_table : dec.w_d; }

    const RunConfig& config() const { return cfg_; }
    int vocab_size() const { return vocab_size_; }
    int n_styles() const { return n_styles_; }

    ImageEncoderParams img_enc;
    ObjectEncoderParams obj_enc;
    std::optional<nn::Embedding> obj_table;  // present iff not shared with w_d
    EncoderParams enc;
    DecoderParams dec;
    PriorParams prior;
    LatentStyleClassifierParams cs;

private:
    RunConfig cfg_;
    int vocab_size_ = 0;
    int n_styles_ = 0;
};

// ---------------------------------------------------------------------------
// Loss assembly
// ---------------------------------------------------------------------------

// One preprocessed training example; phrase_ids is empty for factual samples.
struct TrainSample {
    bool paired = false;
    Vec image_feature;
    std::vector<int> object_ids;
    std::vector<int> target_ids;
    std::vector<int> phrase_ids;
    int style_id = 0;
};

struct Lambdas {
    double cont = 0.1;
    double ce = 1.0;
    double kl = 0.02;
    double style = 2.0;

    static Lambdas from_config(const RunConfig& c) {
        // the language_model ablation trains without any alignment pressure
        const double cont =
            c.unpaired_mode == UnpairedMode::language_model ? 0.0 : c.lambda_cont;
        return {cont, c.lambda_ce, c.lambda_kl, c.lambda_style};
    }
};

struct LossBreakdown {
    double cont = 0.0;   // symmetric InfoNCE, mean over anchors
    double ce = 0.0;     // sum over tokens, mean over batch
    double kl = 0.0;     // sum over dims, mean over batch
    double style = 0.0;  // mean over batch
    double total = 0.0;

    bool finite() const {
        return std::isfinite(cont) && std::isfinite(ce) && std::isfinite(kl) &&
               std::isfinite(style) && std::isfinite(total);
    }
};

// Weighted objective over one homogeneous batch. The contrastive term applies
// only to paired batches with at least two samples; the KL prior conditions on
// the image feature for paired batches and on the object-words feature for
// unpaired ones. `noises` supplies one standard-normal vector per sample so
// the whole computation is a deterministic function of its arguments.
inline LossBreakdown total_loss(Model& m, const std::vector<const TrainSample*>& batch,
                                const Lambdas& lam, const std::vector<Vec>& noises,
                                const StyleSet& styles, bool do_backward) {
    const std::size_t n = batch.size();
    if (n == 0) throw std::invalid_argument("total_loss: empty batch");
    if (noises.size() != n) throw std::invalid_argument("total_loss: need one noise per sample");
    const bool paired = batch.front()->paired;
    for (const auto* s : batch)
        if (s->paired != paired) throw std::invalid_argument("total_loss: mixed batch");

    const double inv_b = 1.0 / static_cast<double>(n);
    const bool use_cont = paired && n >= 2 && lam.cont != 0.0;

    LossBreakdown out;
    std::vector<AlignedFeature> img_feats(use_cont ? n : 0);
    std::vector<AlignedFeature> obj_feats(use_cont ? n : 0);
    std::vector<Vec> d_img(use_cont ? n : 0), d_obj(use_cont ? n : 0);

    struct PerSample {
        AlignedFeature cond;
        EncoderTrace enc;
        LatentSample z;
        GaussianParams prior_g;
        DecoderTrace dec;
        Vec cs_dlogits;  // softmax - onehot, unscaled
        Vec dcond;       // accumulated dL/d cond feature
    };
    std::vector<PerSample> ws(n);

    for (std::size_t i = 0; i < n; ++i) {
        const TrainSample& s = *batch[i];
        PerSample& w = ws[i];
        if (paired) {
            w.cond = encode_image(s.image_feature, m.img_enc);
            if (use_cont) {
                img_feats[i] = w.cond;
                obj_feats[i] = encode_objects(s.object_ids, m.object_table(), m.obj_enc);
                d_img[i] = Vec::Zero(w.cond.vector.size());
                d_obj[i] = Vec::Zero(w.cond.vector.size());
            }
        } else {
            w.cond = encode_objects(s.object_ids, m.object_table(), m.obj_enc);
        }
        w.enc = encode_posterior_trace(s.phrase_ids, m.enc);
        w.z = reparameterize(w.enc.g, noises[i], LatentSample::Origin::posterior);
        w.prior_g = prior_mean(w.cond, m.prior);
        w.dec = decode_teacher_forced_trace(w.cond, styles.at(s.style_id), w.z, s.target_ids, m.dec);

        out.ce += cross_entropy_loss(w.dec.logps, s.target_ids) * inv_b;
        out.kl += kl_divergence(w.enc.g, w.prior_g) * inv_b;
        out.style += nn::cross_entropy_from_logits(m.cs.lin.forward(w.z.z), s.style_id,
                                                   &w.cs_dlogits) *
                     inv_b;
        w.dcond = Vec::Zero(w.cond.vector.size());
    }

    if (use_cont) out.cont = contrastive_loss(img_feats, obj_feats, m.config().tau);
    out.total = lam.cont * out.cont + lam.ce * out.ce + lam.kl * out.kl + lam.style * out.style;

    if (!do_backward) return out;

    if (use_cont)
        contrastive_loss_backward(img_feats, obj_feats, m.config().tau, lam.cont, d_img, d_obj);

    for (std::size_t i = 0; i < n; ++i) {
        const TrainSample& s = *batch[i];
        PerSample& w = ws[i];

        // cross-entropy path
        DecoderGrads dg = decode_ce_backward(w.dec, s.target_ids, lam.ce * inv_b, m.dec);
        w.dcond += dg.dfeature;
        Vec dz = dg.dz;

        // latent style classifier path
        dz += m.cs.lin.backward(w.z.z, Vec(w.cs_dlogits * (lam.style * inv_b)));

        // KL path
        const Vec delta = w.enc.g.mean - w.prior_g.mean;
        Vec dmu = lam.kl * inv_b * delta;
        Vec dlv = (lam.kl * inv_b * 0.5) * ((w.enc.g.log_var.array().exp() - 1.0).matrix());
        Vec dmu_k = -lam.kl * inv_b * delta;
        w.dcond += m.prior.proj.backward(w.cond.vector, dmu_k);

        // reparameterization: z = mu + exp(lv/2) * eps
        dmu += dz;
        dlv += 0.5 * dz.cwiseProduct((w.enc.g.log_var.array() / 2.0).exp().matrix())
                         .cwiseProduct(noises[i]);
        encode_posterior_backward(w.enc, dmu, dlv, m.enc);

        // conditioning feature path
        if (paired) {
            Vec total_dimg = w.dcond + (use_cont ? d_img[i] : Vec(Vec::Zero(w.dcond.size())));
            encode_image_backward(s.image_feature, total_dimg, m.img_enc);
            if (use_cont)
                encode_objects_backward(s.object_ids, d_obj[i], m.object_table_mut(), m.obj_enc);
        } else {
            encode_objects_backward(s.object_ids, w.dcond, m.object_table_mut(), m.obj_enc);
        }
    }
    return out;
}

// Teacher-forced token accuracy with z fixed at the posterior mean.
inline double token_accuracy(Model& m, const std::vector<TrainSample>& samples,
                             const StyleSet& styles) {
    std::size_t correct = 0, total = 0;
    for (const auto& s : samples) {
        AlignedFeature cond = s.paired
                                  ? encode_image(s.image_feature, m.img_enc)
                                  : encode_objects(s.object_ids, m.object_table(), m.obj_enc);
        GaussianParams g = encode_posterior(s.phrase_ids, m.enc);
        LatentSample z{g.mean, LatentSample::Origin::posterior};
        auto logps = decode_teacher_forced(cond, styles.at(s.style_id), z, s.target_ids, m.dec);
        for (std::size_t k = 0; k < logps.size(); ++k) {
            const int tgt = k < s.target_ids.size() ? s.target_ids[k] : WordVocabulary::kEos;
            Eigen::Index argmax;
            logps[k].maxCoeff(&argmax);
            correct += (static_cast<int>(argmax) == tgt) ? 1 : 0;
            ++total;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace stylecap
