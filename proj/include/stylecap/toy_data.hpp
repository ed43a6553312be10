#pragma once

#include "stylecap/corpus.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace stylecap::toy {

// Templated two-style corpus with disjoint style-marker vocabularies and
// synthetic image features correlated with the object words. Small enough to
// train in seconds, rich enough that latent sampling has distinct stylistic
// patterns to pick up.

struct ToyOptions {
    int n_paired = 200;
    int n_unpaired_per_style = 100;  // per non-factual style
    int n_test = 50;
    double weak_style_fraction = 0.0;  // stylized captions emitted without a tail
    std::uint64_t seed = 1;
    int feature_dim = 2048;
    double feature_noise = 0.1;
};

struct ToyImage {
    Vec feature;
    std::vector<std::string> object_words;
    std::vector<StyledCaption> references;  // factual captions of the same scene
};

struct ToyDataset {
    ObjectVocabulary objects;
    StyleSet styles;
    std::vector<PairedSample> paired;
    std::vector<UnpairedSample> unpaired;
    std::vector<ToyImage> test_images;
};

namespace detail {

inline const std::vector<std::string>& object_list() {
    static const std::vector<std::string> v = {
        "man", "woman", "boy",  "girl", "dog",  "cat",  "people", "bird",
        "car", "bike",  "park", "beach", "ball", "tree", "snow",  "street"};
    return v;
}

inline const std::vector<std::string>& subjects() {
    static const std::vector<std::string> v = {"man", "woman", "boy",  "girl", "dog",
                                               "cat", "people", "bird", "car",  "bike"};
    return v;
}

inline const std::vector<std::string>& places() {
    static const std::vector<std::string> v = {"park", "beach", "street", "snow", "tree"};
    return v;
}

inline const std::vector<std::string>& verbs() {
    static const std::vector<std::string> v = {"walking", "running",  "sitting", "playing",
                                               "standing", "jumping", "resting"};
    return v;
}

inline const std::vector<std::string>& style_tails(const std::string& style) {
    static const std::vector<std::string> romantic = {
        "to meet his lover",        "dreaming of sweet love",
        "with loving heart",        "longing for true romance",
        "under the tender moonlight", "cherishing warm memories",
        "devoted to his beloved",   "wishing for gentle kisses"};
    static const std::vector<std::string> humorous = {
        "like a clumsy clown",       "chasing a crazy squirrel",
        "trying to become famous",   "wearing a silly hat",
        "telling funny jokes",       "like a goofy ninja",
        "plotting wild mischief",    "dressed in ridiculous pajamas"};
    if (style == "romantic") return romantic;
    if (style == "humorous") return humorous;
    throw std::invalid_argument("toy data has no tail set for style: " + style);
}

inline std::string make_body(Rng& rng) {
    const auto& sub = subjects();
    const auto& vb = verbs();
    const auto& pl = places();
    const std::string s = sub[rng.index(sub.size())];
    const std::string v = vb[rng.index(vb.size())];
    const std::string p = pl[rng.index(pl.size())];
    switch (rng.index(4)) {
        case 0: return "a " + s + " is " + v + " in the " + p;
        case 1: return "a " + s + " is " + v + " near the " + p;
        case 2: {
            std::string s2 = sub[rng.index(sub.size())];
            return "a " + s + " and a " + s2 + " are " + v + " in the " + p;
        }
        default: return "the " + s + " is " + v + " by the " + p;
    }
}

// One fixed gaussian prototype per object word; a caption's feature is the
// mean of its objects' prototypes plus isotropic noise.
inline std::vector<Vec> make_prototypes(int dim, std::uint64_t seed) {
    std::vector<Vec> protos;
    Rng rng(mix_seed(seed, 0xF3A70));
    for (std::size_t i = 0; i < object_list().size(); ++i) protos.push_back(rng.normal_vec(dim));
    return protos;
}

inline Vec make_feature(const std::vector<std::string>& object_words,
                        const std::vector<Vec>& protos, const ObjectVocabulary& objects,
                        double noise, Rng& rng) {
    Vec f = Vec::Zero(protos.front().size());
    int used = 0;
    for (const auto& w : object_words) {
        for (std::size_t i = 0; i < objects.words().size(); ++i) {
            if (objects.words()[i] == w) {
                f += protos[i];
                ++used;
                break;
            }
        }
    }
    if (used > 0) f /= static_cast<double>(used);
    return f + noise * rng.normal_vec(f.size());
}

}  // namespace detail

inline ToyDataset make_toy_dataset(const ToyOptions& opts) {
    ToyDataset d;
    d.objects = ObjectVocabulary(detail::object_list());
    d.styles = StyleSet({"factual", "romantic", "humorous"});
    auto protos = detail::make_prototypes(opts.feature_dim, opts.seed);
    Rng rng(mix_seed(opts.seed, 0x70FD5));

    for (int i = 0; i < opts.n_paired; ++i) {
        PairedSample s;
        s.caption.tokens = tokenize(detail::make_body(rng));
        s.caption.style = d.styles.factual();
        s.object_words = extract_object_words(s.caption, d.objects);
        s.image_feature =
            detail::make_feature(s.object_words, protos, d.objects, opts.feature_noise, rng);
        d.paired.push_back(std::move(s));
    }

    for (const auto& label : d.styles.labels()) {
        if (d.styles.is_factual(label)) continue;
        const auto& tails = detail::style_tails(label.name);
        for (int i = 0; i < opts.n_unpaired_per_style; ++i) {
            UnpairedSample s;
            std::string text = detail::make_body(rng);
            if (rng.uniform() >= opts.weak_style_fraction)
                text += " " + tails[rng.index(tails.size())];
            s.caption.tokens = tokenize(text);
            s.caption.style = label;
            s.object_words = extract_object_words(s.caption, d.objects);
            d.unpaired.push_back(std::move(s));
        }
    }

    for (int i = 0; i < opts.n_test; ++i) {
        ToyImage img;
        StyledCaption first;
        first.tokens = tokenize(detail::make_body(rng));
        first.style = d.styles.factual();
        img.object_words = extract_object_words(first, d.objects);
        img.feature =
            detail::make_feature(img.object_words, protos, d.objects, opts.feature_noise, rng);
        img.references.push_back(first);
        // a second reference describing the same objects
        StyledCaption second;
        std::string alt = "a";
        for (const auto& w : img.object_words) alt += " " + w;
        second.tokens = tokenize(alt + " scene");
        second.style = d.styles.factual();
        img.references.push_back(second);
        d.test_images.push_back(std::move(img));
    }
    return d;
}

// Writes the dataset in the formats the CLI consumes, plus a ready-to-train
// toy config.
inline void write_toy_files(const ToyDataset& d, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto path = [&](const std::string& name) { return (fs::path(dir) / name).string(); };

    d.objects.save(path("objects.txt"));

    {
        std::ofstream out(path("paired_train.jsonl"));
        for (const auto& s : d.paired) {
            nlohmann::json rec;
            rec["feature"] = std::vector<double>(s.image_feature.data(),
                                                 s.image_feature.data() + s.image_feature.size());
            std::string text;
            for (const auto& t : s.caption.tokens) text += (text.empty() ? "" : " ") + t;
            rec["caption"] = text;
            out << rec.dump() << "\n";
        }
    }

    std::map<std::string, std::ofstream> style_files;
    for (const auto& l : d.styles.labels())
        if (!d.styles.is_factual(l)) style_files.emplace(l.name, path(l.name + "_train.txt"));
    for (const auto& s : d.unpaired) {
        std::string text;
        for (const auto& t : s.caption.tokens) text += (text.empty() ? "" : " ") + t;
        style_files.at(s.caption.style.name) << text << "\n";
    }

    {
        std::ofstream out(path("factual_train.txt"));
        for (const auto& s : d.paired) {
            std::string text;
            for (const auto& t : s.caption.tokens) text += (text.empty() ? "" : " ") + t;
            out << text << "\n";
        }
    }

    {
        std::ofstream feats(path("test_features.jsonl"));
        std::ofstream refs(path("references.jsonl"));
        for (std::size_t i = 0; i < d.test_images.size(); ++i) {
            const auto& img = d.test_images[i];
            nlohmann::json frec;
            frec["image_id"] = i;
            frec["feature"] =
                std::vector<double>(img.feature.data(), img.feature.data() + img.feature.size());
            feats << frec.dump() << "\n";
            nlohmann::json rrec;
            rrec["image_id"] = i;
            std::vector<std::string> texts;
            for (const auto& r : img.references) {
                std::string text;
                for (const auto& t : r.tokens) text += (text.empty() ? "" : " ") + t;
                texts.push_back(text);
            }
            rrec["references"] = texts;
            refs << rrec.dump() << "\n";
        }
    }

    {
        std::ofstream cfg(path("toy.cfg"));
        cfg << "# toy-scale dimensions; everything else keeps its default\n"
            << "image_feature_dim = " << d.paired.front().image_feature.size() << "\n"
            << "multimodal_dim = 64\n"
            << "hidden_dim = 64\n"
            << "latent_dim = 16\n"
            << "classifier_hidden_dim = 32\n"
            << "classifier_embed_dim = 32\n"
            << "lr = 0.002\n"
            << "classifier_lr = 0.01\n"
            << "batch_size = 16\n"
            << "epochs = 40\n"
            << "classifier_epochs = 15\n";
    }
}

}  // namespace stylecap::toy
