#pragma once

#include "stylecap/trainer.hpp"

#include <cstring>
#include <fstream>

namespace stylecap {

// Versioned binary container: config echo, style set, vocabularies (with
// content hashes), then every parameter tensor by name. Raw doubles are
// copied byte-for-byte, so save/load round-trips exactly.
namespace ckpt {

constexpr char kMagic[8] = {'S', 'C', 'C', 'K', 'P', 'T', '0', '1'};

inline void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_string(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
inline std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
inline std::string read_string(std::istream& is) {
    const std::uint32_t n = read_u32(is);
    std::string s(n, '\0');
    is.read(s.data(), n);
    return s;
}

inline void write_tensors(std::ostream& os, std::vector<TensorRef> refs) {
    write_u32(os, static_cast<std::uint32_t>(refs.size()));
    for (const auto& r : refs) {
        write_string(os, r.name);
        write_u64(os, static_cast<std::uint64_t>(r.size));
        os.write(reinterpret_cast<const char*>(r.value),
                 static_cast<std::streamsize>(r.size * sizeof(double)));
    }
}

inline void read_tensors(std::istream& is, std::vector<TensorRef> refs, const std::string& what) {
    const std::uint32_t n = read_u32(is);
    if (n != refs.size())
        throw std::runtime_error("checkpoint: " + what + " tensor count mismatch");
    for (auto& r : refs) {
        const std::string name = read_string(is);
        const auto size = static_cast<std::ptrdiff_t>(read_u64(is));
        if (name != r.name || size != r.size)
            throw std::runtime_error("checkpoint: tensor layout mismatch at " + name +
                                     ", expected " + r.name);
        is.read(reinterpret_cast<char*>(r.value),
                static_cast<std::streamsize>(r.size * sizeof(double)));
    }
}

}  // namespace ckpt

inline void save_checkpoint(const std::string& path, TrainedArtifacts& a) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
    os.write(ckpt::kMagic, sizeof ckpt::kMagic);
    ckpt::write_string(os, a.config.to_string());
    ckpt::write_u32(os, static_cast<std::uint32_t>(a.styles.size()));
    for (const auto& l : a.styles.labels()) ckpt::write_string(os, l.name);
    ckpt::write_u64(os, a.vocab.content_hash());
    const auto words = a.vocab.content_words();
    ckpt::write_u32(os, static_cast<std::uint32_t>(words.size()));
    for (const auto& w : words) ckpt::write_string(os, w);
    ckpt::write_u64(os, a.obj_vocab.content_hash());
    ckpt::write_u32(os, static_cast<std::uint32_t>(a.obj_vocab.size()));
    for (const auto& w : a.obj_vocab.words()) ckpt::write_string(os, w);
    ckpt::write_tensors(os, a.model.collect());
    std::vector<TensorRef> crefs;
    a.classifier.collect(crefs);
    ckpt::write_tensors(os, crefs);
    if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

inline TrainedArtifacts load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[sizeof ckpt::kMagic];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, ckpt::kMagic, sizeof magic) != 0)
        throw std::runtime_error("not a checkpoint file (bad magic): " + path);

    TrainedArtifacts a;
    a.config = RunConfig::from_string(ckpt::read_string(is));
    const std::uint32_t n_styles = ckpt::read_u32(is);
    std::vector<std::string> style_names;
    for (std::uint32_t i = 0; i < n_styles; ++i) style_names.push_back(ckpt::read_string(is));
    a.styles = StyleSet(style_names);

    const std::uint64_t vocab_hash = ckpt::read_u64(is);
    const std::uint32_t n_words = ckpt::read_u32(is);
    std::vector<std::string> words;
    words.reserve(n_words);
    for (std::uint32_t i = 0; i < n_words; ++i) words.push_back(ckpt::read_string(is));
    a.vocab = WordVocabulary(words);
    if (a.vocab.content_hash() != vocab_hash)
        throw std::runtime_error("checkpoint: word vocabulary hash mismatch");

    const std::uint64_t obj_hash = ckpt::read_u64(is);
    const std::uint32_t n_obj = ckpt::read_u32(is);
    std::vector<std::string> obj_words;
    obj_words.reserve(n_obj);
    for (std::uint32_t i = 0; i < n_obj; ++i) obj_words.push_back(ckpt::read_string(is));
    a.obj_vocab = ObjectVocabulary(obj_words);
    if (a.obj_vocab.content_hash() != obj_hash)
        throw std::runtime_error("checkpoint: object vocabulary hash mismatch");

    a.model.build(a.config, a.vocab.size(), a.styles.size());
    ckpt::read_tensors(is, a.model.collect(), "model");
    a.classifier = AttnClassifierParams(a.vocab.size(), a.config.classifier_embed_dim,
                                        a.config.classifier_hidden_dim, a.styles.size());
    std::vector<TensorRef> crefs;
    a.classifier.collect(crefs);
    ckpt::read_tensors(is, crefs, "classifier");
    if (!is) throw std::runtime_error("checkpoint truncated: " + path);
    return a;
}

}  // namespace stylecap
