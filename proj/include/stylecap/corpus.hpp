#pragma once

#include "stylecap/common.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace stylecap {

// ---------------------------------------------------------------------------
// Styles
// ---------------------------------------------------------------------------
struct StyleLabel {
    int id = 0;
    std::string name;
};

// Dense style-id set; exactly one label must be named "factual".
class StyleSet {
public:
    StyleSet() = default;
    explicit StyleSet(const std::vector<std::string>& names) {
        std::set<std::string> seen;
        for (const auto& n : names) {
            if (!seen.insert(n).second) throw std::invalid_argument("duplicate style name: " + n);
            labels_.push_back({static_cast<int>(labels_.size()), n});
        }
        int factual = -1;
        for (const auto& l : labels_) {
            if (l.name == "factual") {
                if (factual >= 0) throw std::invalid_argument("multiple factual styles");
                factual = l.id;
            }
        }
        if (factual < 0) throw std::invalid_argument("style set must contain \"factual\"");
        factual_ = factual;
    }

    int size() const { return static_cast<int>(labels_.size()); }
    const StyleLabel& factual() const { return labels_[factual_]; }
    const StyleLabel& at(int id) const { return labels_.at(id); }
    const std::vector<StyleLabel>& labels() const { return labels_; }

    const StyleLabel& by_name(const std::string& name) const {
        for (const auto& l : labels_)
            if (l.name == name) return l;
        throw std::invalid_argument("unknown style: " + name);
    }

    bool is_factual(const StyleLabel& l) const { return l.id == factual_; }

private:
    std::vector<StyleLabel> labels_;
    int factual_ = 0;
};

// ---------------------------------------------------------------------------
// Captions and samples
// ---------------------------------------------------------------------------
struct StyledCaption {
    std::vector<std::string> tokens;  // lowercased
    StyleLabel style;
};

struct PairedSample {
    Vec image_feature;
    StyledCaption caption;  // factual
    std::vector<std::string> object_words;
};

struct UnpairedSample {
    StyledCaption caption;  // non-factual
    std::vector<std::string> object_words;
};

inline bool is_blank_line(const std::string& line) {
    return std::all_of(line.begin(), line.end(),
                       [](unsigned char c) { return std::isspace(c); });
}

// Lowercase, strip punctuation, split on whitespace.
inline std::vector<std::string> tokenize(const std::string& text) {
    std::string cleaned;
    cleaned.reserve(text.size());
    for (unsigned char c : text) {
        if (std::isalnum(c)) cleaned.push_back(static_cast<char>(std::tolower(c)));
        else if (std::isspace(c)) cleaned.push_back(' ');
        // punctuation dropped
    }
    std::vector<std::string> tokens;
    std::istringstream ss(cleaned);
    std::string tok;
    while (ss >> tok) tokens.push_back(tok);
    return tokens;
}

// ---------------------------------------------------------------------------
// Vocabularies
// ---------------------------------------------------------------------------
class ObjectVocabulary {
public:
    ObjectVocabulary() = default;
    explicit ObjectVocabulary(const std::vector<std::string>& words) {
        for (const auto& w : words) add(w);
    }

    static ObjectVocabulary load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open object vocabulary: " + path);
        ObjectVocabulary v;
        std::string line;
        while (std::getline(in, line)) {
            auto toks = tokenize(line);
            if (toks.size() == 1) v.add(toks[0]);
            else if (toks.size() > 1)
                throw std::runtime_error("object vocabulary expects one word per line: " + line);
        }
        return v;
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write object vocabulary: " + path);
        for (const auto& w : words_) out << w << "\n";
    }

    bool contains(const std::string& w) const { return set_.count(w) > 0; }
    std::size_t size() const { return words_.size(); }
    const std::vector<std::string>& words() const { return words_; }

    std::uint64_t content_hash() const {
        std::string all;
        for (const auto& w : words_) {
            all += w;
            all += '\n';
        }
        return fnv1a(all);
    }

private:
    void add(const std::string& w) {
        if (set_.insert(w).second) words_.push_back(w);
    }

    std::vector<std::string> words_;
    std::unordered_set<std::string> set_;
};

// Word/index bijection with reserved slots for pad, bos, eos, unk.
class WordVocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kUnk = 3;
    static constexpr int kReserved = 4;

    WordVocabulary() { for (const char* t : {"<pad>", "<bos>", "<eos>", "<unk>"}) push(t); }

    explicit WordVocabulary(const std::vector<std::string>& words) : WordVocabulary() {
        for (const auto& w : words) {
            if (index_.count(w)) throw std::invalid_argument("duplicate vocabulary word: " + w);
            push(w);
        }
    }

    int size() const { return static_cast<int>(tokens_.size()); }

    int encode(const std::string& w) const {
        auto it = index_.find(w);
        return it == index_.end() ? kUnk : it->second;
    }

    const std::string& decode(int id) const { return tokens_.at(id); }

    std::vector<int> encode_seq(const std::vector<std::string>& words) const {
        std::vector<int> ids;
        ids.reserve(words.size());
        for (const auto& w : words) ids.push_back(encode(w));
        return ids;
    }

    std::vector<std::string> decode_seq(const std::vector<int>& ids) const {
        std::vector<std::string> words;
        words.reserve(ids.size());
        for (int id : ids) words.push_back(decode(id));
        return words;
    }

    bool contains(const std::string& w) const { return index_.count(w) > 0; }

    // Non-reserved tokens in index order; file format is one token per line.
    std::vector<std::string> content_words() const {
        return {tokens_.begin() + kReserved, tokens_.end()};
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write vocabulary: " + path);
        for (int i = kReserved; i < size(); ++i) out << tokens_[i] << "\n";
    }

    static WordVocabulary load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open vocabulary: " + path);
        std::vector<std::string> words;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) words.push_back(line);
        }
        return WordVocabulary(words);
    }

    std::uint64_t content_hash() const {
        std::string all;
        for (const auto& t : tokens_) {
            all += t;
            all += '\n';
        }
        return fnv1a(all);
    }

private:
    void push(const std::string& t) {
        index_[t] = static_cast<int>(tokens_.size());
        tokens_.push_back(t);
    }

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Tokens of `caption` present in `vocab`, original order, first occurrence only.
inline std::vector<std::string> extract_object_words(const StyledCaption& caption,
                                                     const ObjectVocabulary& vocab) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& tok : caption.tokens) {
        if (vocab.contains(tok) && seen.insert(tok).second) out.push_back(tok);
    }
    return out;
}

// Paired JSONL: {"feature": [...], "caption": "..."} per line.
inline std::vector<PairedSample> load_paired_corpus(const std::string& path,
                                                    const ObjectVocabulary& obj_vocab,
                                                    const StyleSet& styles,
                                                    int feature_dim = 2048) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open paired corpus: " + path);
    std::vector<PairedSample> samples;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (is_blank_line(line)) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": malformed JSON record: " + e.what());
        }
        if (!rec.contains("feature") || !rec.contains("caption"))
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": record needs \"feature\" and \"caption\"");
        const auto& feat = rec["feature"];
        if (!feat.is_array() || static_cast<int>(feat.size()) != feature_dim)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": feature length " +
                                     std::to_string(feat.size()) + ", expected " +
                                     std::to_string(feature_dim));
        PairedSample s;
        s.image_feature.resize(feature_dim);
        for (int i = 0; i < feature_dim; ++i) {
            if (!feat[i].is_number())
                throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                         ": non-numeric feature entry");
            s.image_feature[i] = feat[i].get<double>();
        }
        s.caption.tokens = tokenize(rec["caption"].get<std::string>());
        if (s.caption.tokens.empty())
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty caption");
        s.caption.style = styles.factual();
        s.object_words = extract_object_words(s.caption, obj_vocab);
        samples.push_back(std::move(s));
    }
    return samples;
}

// Unpaired text: one caption per line; style applies to the whole file.
inline std::vector<UnpairedSample> load_unpaired_corpus(const std::string& path,
                                                        const StyleLabel& style,
                                                        const ObjectVocabulary& obj_vocab) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open unpaired corpus: " + path);
    std::vector<UnpairedSample> samples;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (is_blank_line(line)) continue;
        UnpairedSample s;
        s.caption.tokens = tokenize(line);
        if (s.caption.tokens.empty())
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty caption");
        s.caption.style = style;
        // zero object words is fine; such samples fall back to the unk embedding
        s.object_words = extract_object_words(s.caption, obj_vocab);
        samples.push_back(std::move(s));
    }
    return samples;
}

// Frequency >= min_count, ordered by frequency desc then lexicographic.
inline WordVocabulary build_word_vocabulary(const std::vector<const StyledCaption*>& captions,
                                            int min_count) {
    if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");
    std::map<std::string, long> counts;
    for (const auto* c : captions)
        for (const auto& t : c->tokens) ++counts[t];
    std::vector<std::pair<std::string, long>> entries(counts.begin(), counts.end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> words;
    for (const auto& [w, c] : entries)
        if (c >= min_count) words.push_back(w);
    return WordVocabulary(words);
}

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------
struct Batch {
    bool paired = false;
    std::vector<std::size_t> indices;  // into the paired or unpaired collection
};

// Homogeneous batches covering every sample exactly once, in an order that is
// a pure function of `seed`. Trailing partial batches are kept; the loss
// routine masks the contrastive term for paired batches of size < 2.
inline std::vector<Batch> make_batches(std::size_t n_paired, std::size_t n_unpaired,
                                       int batch_size, std::uint64_t seed) {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    Rng rng(mix_seed(seed, 0xBA7C4));
    std::vector<std::size_t> pi(n_paired), ui(n_unpaired);
    for (std::size_t i = 0; i < n_paired; ++i) pi[i] = i;
    for (std::size_t i = 0; i < n_unpaired; ++i) ui[i] = i;
    rng.shuffle(pi);
    rng.shuffle(ui);
    std::vector<Batch> batches;
    auto chunk = [&](const std::vector<std::size_t>& ids, bool paired) {
        for (std::size_t at = 0; at < ids.size(); at += batch_size) {
            Batch b;
            b.paired = paired;
            const std::size_t end = std::min(ids.size(), at + batch_size);
            b.indices.assign(ids.begin() + at, ids.begin() + end);
            batches.push_back(std::move(b));
        }
    };
    chunk(pi, true);
    chunk(ui, false);
    rng.shuffle(batches);
    return batches;
}

inline std::vector<Batch> make_batches(const std::vector<PairedSample>& paired,
                                       const std::vector<UnpairedSample>& unpaired,
                                       int batch_size, std::uint64_t seed) {
    return make_batches(paired.size(), unpaired.size(), batch_size, seed);
}

}  // namespace stylecap
