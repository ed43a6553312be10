#pragma once

#include "stylecap/corpus.hpp"
#include "stylecap/nn.hpp"

#include <vector>

namespace stylecap {

// A point in the shared multimodal space, tagged with where it came from.
struct AlignedFeature {
    Vec vector;
    enum class Source { image, object_words } source = Source::image;
};

// Trainable projection from the upstream CNN feature (2048) into the shared
// space. The CNN itself is consumed as precomputed vectors.
struct ImageEncoderParams {
    nn::Linear proj;  // multimodal_dim x image_feature_dim

    void collect(std::vector<TensorRef>& out) { proj.collect(out, "image_encoder"); }
};

// Object-word route: mean of word embeddings followed by a linear map. The
// embedding table is shared with the decoder table W_D unless configured
// otherwise, so it lives with the model and is passed in per call.
struct ObjectEncoderParams {
    nn::Linear proj;  // multimodal_dim x multimodal_dim

    void collect(std::vector<TensorRef>& out) { proj.collect(out, "object_encoder"); }
};

inline AlignedFeature encode_image(const Vec& feature, const ImageEncoderParams& params) {
    if (feature.size() != params.proj.in_dim())
        throw std::invalid_argument("encode_image: feature length " +
                                    std::to_string(feature.size()) + ", expected " +
                                    std::to_string(params.proj.in_dim()));
    if (!feature.allFinite()) throw std::invalid_argument("encode_image: non-finite input");
    return {params.proj.forward(feature), AlignedFeature::Source::image};
}

// dL/dfeature (accumulates the projection's gradients)
inline Vec encode_image_backward(const Vec& feature, const Vec& dvec, ImageEncoderParams& params) {
    return params.proj.backward(feature, dvec);
}

// Mean of word embeddings -> linear. Empty id list falls back to the unk
// embedding, which is how zero-object stylized samples are handled.
inline AlignedFeature encode_objects(const std::vector<int>& word_ids, const nn::Embedding& table,
                                     const ObjectEncoderParams& params) {
    Vec mean;
    if (word_ids.empty()) {
        mean = table.lookup(WordVocabulary::kUnk);
    } else {
        mean = Vec::Zero(table.dim());
        for (int id : word_ids) mean += table.lookup(id);
        mean /= static_cast<double>(word_ids.size());
    }
    return {params.proj.forward(mean), AlignedFeature::Source::object_words};
}

inline AlignedFeature encode_objects(const std::vector<std::string>& words,
                                     const WordVocabulary& vocab, const nn::Embedding& table,
                                     const ObjectEncoderParams& params) {
    return encode_objects(vocab.encode_seq(words), table, params);
}

inline void encode_objects_backward(const std::vector<int>& word_ids, const Vec& dvec,
                                    nn::Embedding& table, ObjectEncoderParams& params) {
    Vec mean;
    if (word_ids.empty()) {
        mean = table.lookup(WordVocabulary::kUnk);
    } else {
        mean = Vec::Zero(table.dim());
        for (int id : word_ids) mean += table.lookup(id);
        mean /= static_cast<double>(word_ids.size());
    }
    Vec dmean = params.proj.backward(mean, dvec);
    if (word_ids.empty()) {
        table.accumulate(WordVocabulary::kUnk, dmean);
    } else {
        Vec share = dmean / static_cast<double>(word_ids.size());
        for (int id : word_ids) table.accumulate(id, share);
    }
}

// ---------------------------------------------------------------------------
// Contrastive alignment objective
// ---------------------------------------------------------------------------
namespace detail {

struct ContrastiveWork {
    std::vector<Vec> u, v;          // unit vectors
    std::vector<double> nu, nv;     // norms
    Mat s;                          // cosine similarity, s(i,j) = u_i . v_j
};

inline ContrastiveWork contrastive_prepare(const std::vector<AlignedFeature>& image_feats,
                                           const std::vector<AlignedFeature>& object_feats) {
    const std::size_t n = image_feats.size();
    if (n == 0) throw std::invalid_argument("contrastive_loss: empty batch");
    if (object_feats.size() != n)
        throw std::invalid_argument("contrastive_loss: feature count mismatch");
    ContrastiveWork w;
    w.u.resize(n);
    w.v.resize(n);
    w.nu.resize(n);
    w.nv.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        w.nu[i] = image_feats[i].vector.norm();
        w.nv[i] = object_feats[i].vector.norm();
        if (w.nu[i] == 0.0 || w.nv[i] == 0.0)
            throw std::invalid_argument("contrastive_loss: zero-norm vector, cosine undefined");
        w.u[i] = image_feats[i].vector / w.nu[i];
        w.v[i] = object_feats[i].vector / w.nv[i];
    }
    w.s.resize(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) w.s(i, j) = w.u[i].dot(w.v[j]);
    return w;
}

}  // namespace detail

// Symmetric InfoNCE over matched (image, object-words) pairs: the mean of the
// image->object and object->image directions, each a softmax cross-entropy
// over in-batch cosine similarities at temperature tau.
inline double contrastive_loss(const std::vector<AlignedFeature>& image_feats,
                               const std::vector<AlignedFeature>& object_feats, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("contrastive_loss: tau must be positive");
    auto w = detail::contrastive_prepare(image_feats, object_feats);
    const Eigen::Index n = w.s.rows();
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        Vec row = w.s.row(i).transpose() / tau;
        Vec col = w.s.col(i) / tau;
        loss += -nn::log_softmax(row)[i];  // image anchor vs object candidates
        loss += -nn::log_softmax(col)[i];  // object anchor vs image candidates
    }
    return loss / (2.0 * static_cast<double>(n));
}

// Gradients w.r.t. the raw (pre-normalization) feature vectors, scaled by
// `scale`. Outputs are accumulated into d_image / d_object.
inline double contrastive_loss_backward(const std::vector<AlignedFeature>& image_feats,
                                        const std::vector<AlignedFeature>& object_feats,
                                        double tau, double scale, std::vector<Vec>& d_image,
                                        std::vector<Vec>& d_object) {
    if (tau <= 0.0) throw std::invalid_argument("contrastive_loss: tau must be positive");
    auto w = detail::contrastive_prepare(image_feats, object_feats);
    const Eigen::Index n = w.s.rows();
    double loss = 0.0;
    Mat g = Mat::Zero(n, n);  // dL/ds
    const double inv = 1.0 / (2.0 * static_cast<double>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        Vec row_p = nn::softmax(Vec(w.s.row(i).transpose() / tau));
        Vec col_p = nn::softmax(Vec(w.s.col(i) / tau));
        loss += -std::log(row_p[i]) - std::log(col_p[i]);
        for (Eigen::Index j = 0; j < n; ++j) {
            g(i, j) += (row_p[j] - (i == j ? 1.0 : 0.0)) / tau * inv;
            g(j, i) += (col_p[j] - (i == j ? 1.0 : 0.0)) / tau * inv;
        }
    }
    loss *= inv;
    for (Eigen::Index i = 0; i < n; ++i) {
        Vec du = Vec::Zero(w.u[i].size());
        for (Eigen::Index j = 0; j < n; ++j) du += g(i, j) * w.v[j];
        // through the normalization: d/da (a/|a|)^T du = (du - (u.du) u)/|a|
        d_image[i] += scale * (du - w.u[i].dot(du) * w.u[i]) / w.nu[i];
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        Vec dv = Vec::Zero(w.v[j].size());
        for (Eigen::Index i = 0; i < n; ++i) dv += g(i, j) * w.u[i];
        d_object[j] += scale * (dv - w.v[j].dot(dv) * w.v[j]) / w.nv[j];
    }
    return loss;
}

}  // namespace stylecap
