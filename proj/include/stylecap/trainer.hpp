#pragma once

#include "stylecap/cvae.hpp"

#include <iomanip>
#include <ostream>
#include <sstream>

namespace stylecap {

// Everything a generation or evaluation run needs, as produced by training.
struct TrainedArtifacts {
    RunConfig config;
    StyleSet styles;
    WordVocabulary vocab;
    ObjectVocabulary obj_vocab;
    Model model;
    AttnClassifierParams classifier;
};

struct EpochStats {
    int epoch = 0;
    LossBreakdown train;
    double val_total = 0.0;
    double val_ce = 0.0;
    double val_kl = 0.0;
    bool best = false;
};

struct TrainResult {
    TrainedArtifacts artifacts;
    std::vector<EpochStats> history;
    double classifier_val_accuracy = 0.0;
};

namespace detail {

inline std::vector<TrainSample> preprocess(const std::vector<PairedSample>& paired,
                                           const std::vector<UnpairedSample>& unpaired,
                                           const WordVocabulary& vocab, const StyleSet& styles,
                                           const AttnClassifierParams& classifier,
                                           double phrase_ratio) {
    std::vector<TrainSample> samples;
    samples.reserve(paired.size() + unpaired.size());
    for (const auto& p : paired) {
        TrainSample s;
        s.paired = true;
        s.image_feature = p.image_feature;
        s.object_ids = vocab.encode_seq(p.object_words);
        s.target_ids = vocab.encode_seq(p.caption.tokens);
        // factual captions carry the empty style phrase by convention
        s.style_id = p.caption.style.id;
        samples.push_back(std::move(s));
    }
    for (const auto& u : unpaired) {
        TrainSample s;
        s.paired = false;
        s.object_ids = vocab.encode_seq(u.object_words);
        s.target_ids = vocab.encode_seq(u.caption.tokens);
        StylePhrase phrase = extract_style_phrase(u.caption, classifier, vocab, phrase_ratio);
        s.phrase_ids = vocab.encode_seq(phrase.words);
        s.style_id = u.caption.style.id;
        samples.push_back(std::move(s));
    }
    return samples;
}

// Deterministic split into (train, val) index sets over a sample list.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double val_fraction, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(seed, 0x5B117));
    rng.shuffle(order);
    auto n_val = static_cast<std::size_t>(val_fraction * static_cast<double>(n));
    if (n_val >= n) n_val = n == 0 ? 0 : n - 1;
    std::vector<std::size_t> val(order.begin(), order.begin() + n_val);
    std::vector<std::size_t> train(order.begin() + n_val, order.end());
    return {train, val};
}

}  // namespace detail

// Evaluates the weighted objective on a sample set with z fixed at the
// posterior mean (noise = 0); used for validation model selection.
inline LossBreakdown evaluate_loss(Model& model, const std::vector<TrainSample>& samples,
                                   const Lambdas& lam, const StyleSet& styles, int batch_size) {
    LossBreakdown agg;
    if (samples.empty()) return agg;
    std::vector<std::size_t> paired_idx, unpaired_idx;
    for (std::size_t i = 0; i < samples.size(); ++i)
        (samples[i].paired ? paired_idx : unpaired_idx).push_back(i);
    double weight = 0.0;
    int cont_batches = 0;
    double cont_sum = 0.0;
    auto run = [&](const std::vector<std::size_t>& idx) {
        for (std::size_t at = 0; at < idx.size(); at += batch_size) {
            const std::size_t end = std::min(idx.size(), at + batch_size);
            std::vector<const TrainSample*> batch;
            std::vector<Vec> noises;
            for (std::size_t k = at; k < end; ++k) {
                batch.push_back(&samples[idx[k]]);
                noises.push_back(Vec::Zero(model.config().latent_dim));
            }
            LossBreakdown b = total_loss(model, batch, lam, noises, styles, /*backward=*/false);
            const auto bn = static_cast<double>(batch.size());
            agg.ce += b.ce * bn;
            agg.kl += b.kl * bn;
            agg.style += b.style * bn;
            weight += bn;
            if (batch.front()->paired && batch.size() >= 2 && lam.cont != 0.0) {
                cont_sum += b.cont;
                ++cont_batches;
            }
        }
    };
    run(paired_idx);
    run(unpaired_idx);
    agg.ce /= weight;
    agg.kl /= weight;
    agg.style /= weight;
    agg.cont = cont_batches > 0 ? cont_sum / cont_batches : 0.0;
    agg.total = lam.cont * agg.cont + lam.ce * agg.ce + lam.kl * agg.kl + lam.style * agg.style;
    return agg;
}

// Full training pipeline: vocabulary, attention style classifier, style-phrase
// extraction, then joint optimization of the conditional generator. Every
// random choice derives from cfg.seed, so a rerun reproduces the result
// bit-for-bit.
inline TrainResult train(const std::vector<PairedSample>& paired,
                         const std::vector<UnpairedSample>& unpaired, const StyleSet& styles,
                         const ObjectVocabulary& obj_vocab, const RunConfig& cfg,
                         std::ostream* log = nullptr) {
    if (paired.empty() && unpaired.empty()) throw std::invalid_argument("train: no samples");

    std::vector<const StyledCaption*> caption_ptrs;
    for (const auto& p : paired) caption_ptrs.push_back(&p.caption);
    for (const auto& u : unpaired) caption_ptrs.push_back(&u.caption);
    WordVocabulary vocab = build_word_vocabulary(caption_ptrs, cfg.min_count);

    // style classifier, trained first and then frozen
    std::vector<StyledCaption> all_captions;
    for (const auto* c : caption_ptrs) all_captions.push_back(*c);
    ClassifierTrainConfig ccfg;
    ccfg.embed_dim = cfg.classifier_embed_dim;
    ccfg.hidden_dim = cfg.classifier_hidden_dim;
    ccfg.epochs = cfg.classifier_epochs;
    ccfg.lr = cfg.classifier_lr;
    ccfg.batch_size = cfg.batch_size;
    ccfg.seed = cfg.seed;
    ccfg.val_fraction = cfg.val_fraction;
    double cls_val_acc = 1.0;
    AttnClassifierParams classifier =
        train_attn_classifier(all_captions, vocab, styles, ccfg, log, &cls_val_acc);

    std::vector<TrainSample> samples =
        detail::preprocess(paired, unpaired, vocab, styles, classifier, cfg.phrase_ratio);

    auto [train_idx, val_idx] = detail::split_indices(samples.size(), cfg.val_fraction, cfg.seed);
    std::vector<TrainSample> train_set, val_set;
    for (std::size_t i : train_idx) train_set.push_back(samples[i]);
    for (std::size_t i : val_idx) val_set.push_back(samples[i]);

    Model model(cfg, vocab.size(), styles.size());
    Rng init_rng(mix_seed(cfg.seed, 0x10171));
    model.init(init_rng);

    std::vector<TensorRef> refs = model.collect();
    nn::Adam opt(refs, cfg.lr);
    const Lambdas lam = Lambdas::from_config(cfg);
    Rng noise_rng(mix_seed(cfg.seed, 0xA015E));

    std::size_t n_train_paired = 0, n_train_unpaired = 0;
    std::vector<const TrainSample*> train_paired, train_unpaired;
    for (const auto& s : train_set) (s.paired ? train_paired : train_unpaired).push_back(&s);
    n_train_paired = train_paired.size();
    n_train_unpaired = train_unpaired.size();

    TrainResult result;
    result.classifier_val_accuracy = cls_val_acc;
    double best_val = std::numeric_limits<double>::infinity();
    Model best_model;
    bool have_best = false;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto batches = make_batches(n_train_paired, n_train_unpaired, cfg.batch_size,
                                    mix_seed(cfg.seed, 0xE90C0 + static_cast<std::uint64_t>(epoch)));
        LossBreakdown epoch_agg;
        double weight = 0.0;
        double cont_sum = 0.0;
        int cont_batches = 0;
        int batch_no = 0;
        for (const auto& b : batches) {
            ++batch_no;
            std::vector<const TrainSample*> batch;
            std::vector<Vec> noises;
            for (std::size_t idx : b.indices) {
                batch.push_back(b.paired ? train_paired[idx] : train_unpaired[idx]);
                noises.push_back(noise_rng.normal_vec(cfg.latent_dim));
            }
            zero_grads(refs);
            LossBreakdown lb = total_loss(model, batch, lam, noises, styles, /*backward=*/true);
            if (!lb.finite())
                throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                         std::to_string(epoch + 1) + " batch " +
                                         std::to_string(batch_no));
            opt.step();
            const auto bn = static_cast<double>(batch.size());
            epoch_agg.ce += lb.ce * bn;
            epoch_agg.kl += lb.kl * bn;
            epoch_agg.style += lb.style * bn;
            weight += bn;
            if (b.paired && batch.size() >= 2 && lam.cont != 0.0) {
                cont_sum += lb.cont;
                ++cont_batches;
            }
        }
        epoch_agg.ce /= weight;
        epoch_agg.kl /= weight;
        epoch_agg.style /= weight;
        epoch_agg.cont = cont_batches > 0 ? cont_sum / cont_batches : 0.0;
        epoch_agg.total = lam.cont * epoch_agg.cont + lam.ce * epoch_agg.ce +
                          lam.kl * epoch_agg.kl + lam.style * epoch_agg.style;

        EpochStats es;
        es.epoch = epoch + 1;
        es.train = epoch_agg;
        LossBreakdown val =
            evaluate_loss(model, val_set.empty() ? train_set : val_set, lam, styles, cfg.batch_size);
        es.val_total = val.total;
        es.val_ce = val.ce;
        es.val_kl = val.kl;
        if (val.total < best_val) {
            best_val = val.total;
            best_model = model;
            have_best = true;
            es.best = true;
        }
        result.history.push_back(es);
        if (log) {
            *log << "epoch " << std::setw(3) << es.epoch << "/" << cfg.epochs << std::fixed
                 << std::setprecision(4) << "  cont " << epoch_agg.cont << "  ce " << epoch_agg.ce
                 << "  kl " << epoch_agg.kl << "  style " << epoch_agg.style << "  total "
                 << epoch_agg.total << "  val_total " << val.total << (es.best ? "  *" : "")
                 << "\n";
            log->unsetf(std::ios::floatfield);
        }
    }

    result.artifacts.config = cfg;
    result.artifacts.styles = styles;
    result.artifacts.vocab = std::move(vocab);
    result.artifacts.obj_vocab = obj_vocab;
    result.artifacts.model = have_best ? std::move(best_model) : std::move(model);
    result.artifacts.classifier = std::move(classifier);
    return result;
}

}  // namespace stylecap
