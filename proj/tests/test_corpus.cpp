#include "stylecap/corpus.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

using namespace stylecap;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
    auto p = std::filesystem::temp_directory_path() / ("stylecap_corpus_" + name);
    std::ofstream out(p);
    out << content;
    return p;
}

StyledCaption cap(std::vector<std::string> tokens, StyleLabel style = {0, "factual"}) {
    return {std::move(tokens), style};
}

}  // namespace

TEST_CASE("tokenize lowercases, strips punctuation and splits") {
    CHECK(tokenize("A man, walking his DOG!") ==
          std::vector<std::string>{"a", "man", "walking", "his", "dog"});
    CHECK(tokenize("  ") == std::vector<std::string>{});
    CHECK(tokenize("don't") == std::vector<std::string>{"dont"});
}

TEST_CASE("StyleSet invariants") {
    StyleSet s({"factual", "romantic", "humorous"});
    CHECK(s.size() == 3);
    CHECK(s.factual().name == "factual");
    CHECK(s.by_name("romantic").id == 1);
    CHECK_THROWS_AS(StyleSet({"romantic"}), std::invalid_argument);
    CHECK_THROWS_AS(StyleSet({"factual", "factual"}), std::invalid_argument);
}

TEST_CASE("extract_object_words keeps caption order and deduplicates") {
    ObjectVocabulary vocab({"man", "dog", "cat"});
    CHECK(extract_object_words(cap({"a", "man", "walks", "his", "dog"}), vocab) ==
          std::vector<std::string>{"man", "dog"});
    CHECK(extract_object_words(cap({"hello", "world"}), vocab) == std::vector<std::string>{});
    // dedup policy: brute-force set intersection preserving first occurrence
    ObjectVocabulary dog_only({"dog"});
    CHECK(extract_object_words(cap({"dog", "chases", "dog"}), dog_only) ==
          std::vector<std::string>{"dog"});
}

TEST_CASE("extract_object_words is idempotent over its own output") {
    ObjectVocabulary vocab({"man", "dog", "cat", "park"});
    Rng rng(7);
    const std::vector<std::string> pool = {"man", "dog",  "cat",  "park", "walks",
                                           "a",   "the", "jumps", "blue", "sky"};
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::string> tokens;
        const std::size_t len = 1 + rng.index(12);
        for (std::size_t i = 0; i < len; ++i) tokens.push_back(pool[rng.index(pool.size())]);
        auto once = extract_object_words(cap(tokens), vocab);
        auto twice = extract_object_words(cap(once), vocab);
        CHECK(once == twice);
    }
}

TEST_CASE("load_paired_corpus reads JSONL and validates") {
    ObjectVocabulary vocab({"man", "dog"});
    StyleSet styles({"factual", "romantic"});

    SECTION("valid two-line file") {
        std::string line1 = R"({"feature": [1.0, 2.0, 3.0], "caption": "A man and a Dog"})";
        std::string line2 = R"({"feature": [0.5, 0.25, -1.0], "caption": "hello world"})";
        auto p = temp_file("ok.jsonl", line1 + "\n" + line2 + "\n");
        auto samples = load_paired_corpus(p.string(), vocab, styles, 3);
        REQUIRE(samples.size() == 2);
        CHECK(samples[0].caption.tokens ==
              std::vector<std::string>{"a", "man", "and", "a", "dog"});
        CHECK(samples[0].object_words == std::vector<std::string>{"man", "dog"});
        CHECK(samples[0].caption.style.name == "factual");
        CHECK(samples[0].image_feature[1] == 2.0);
        CHECK(samples[1].object_words.empty());
    }

    SECTION("wrong feature length names the line") {
        std::string good = R"({"feature": [1.0, 2.0, 3.0], "caption": "a man"})";
        std::string bad = R"({"feature": [1.0], "caption": "a man"})";
        auto p = temp_file("bad.jsonl", good + "\n" + good + "\n" + bad + "\n");
        try {
            load_paired_corpus(p.string(), vocab, styles, 3);
            FAIL("expected length error");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()).find(":3") != std::string::npos);
        }
    }

    SECTION("malformed JSON names the line") {
        auto p = temp_file("mal.jsonl", "{not json}\n");
        CHECK_THROWS_WITH(load_paired_corpus(p.string(), vocab, styles, 3),
                          Catch::Matchers::ContainsSubstring(":1"));
    }

    SECTION("empty file gives an empty collection") {
        auto p = temp_file("empty.jsonl", "");
        CHECK(load_paired_corpus(p.string(), vocab, styles, 3).empty());
    }
}

TEST_CASE("load_unpaired_corpus") {
    ObjectVocabulary vocab({"man", "dog"});
    StyleSet styles({"factual", "romantic"});
    auto p = temp_file("rom.txt",
                       "a man dreaming of love\n"
                       "nothing to see here\n"
                       "a man dreaming of love\n");
    auto samples = load_unpaired_corpus(p.string(), styles.by_name("romantic"), vocab);
    REQUIRE(samples.size() == 3);
    for (const auto& s : samples) CHECK(s.caption.style.name == "romantic");
    // zero object words is retained
    CHECK(samples[1].object_words.empty());
    // duplicates retained
    CHECK(samples[0].caption.tokens == samples[2].caption.tokens);
}

TEST_CASE("build_word_vocabulary") {
    StyledCaption c1 = cap({"a", "a", "a", "a", "a", "b"});
    std::vector<const StyledCaption*> caps = {&c1};

    SECTION("min_count filters") {
        auto v = build_word_vocabulary(caps, 2);
        CHECK(v.size() == WordVocabulary::kReserved + 1);
        CHECK(v.contains("a"));
        CHECK_FALSE(v.contains("b"));
        CHECK(v.encode("b") == WordVocabulary::kUnk);
    }

    SECTION("min_count 1 keeps everything") {
        auto v = build_word_vocabulary(caps, 1);
        CHECK(v.contains("a"));
        CHECK(v.contains("b"));
    }

    SECTION("equal counts break ties lexicographically") {
        StyledCaption c2 = cap({"zebra", "apple"});
        std::vector<const StyledCaption*> caps2 = {&c2};
        auto v = build_word_vocabulary(caps2, 1);
        CHECK(v.encode("apple") == WordVocabulary::kReserved);
        CHECK(v.encode("zebra") == WordVocabulary::kReserved + 1);
    }

    SECTION("min_count below 1 rejected") {
        CHECK_THROWS_AS(build_word_vocabulary(caps, 0), std::invalid_argument);
    }
}

TEST_CASE("vocabulary round-trips in-vocabulary sequences") {
    StyledCaption c1 = cap({"a", "man", "walks", "his", "dog", "every", "day"});
    std::vector<const StyledCaption*> caps = {&c1};
    auto v = build_word_vocabulary(caps, 1);
    Rng rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<std::string> seq;
        for (std::size_t i = 0; i < 1 + rng.index(8); ++i)
            seq.push_back(c1.tokens[rng.index(c1.tokens.size())]);
        CHECK(v.decode_seq(v.encode_seq(seq)) == seq);
    }
    // save/load keeps the mapping
    auto p = std::filesystem::temp_directory_path() / "stylecap_vocab.txt";
    v.save(p.string());
    auto v2 = WordVocabulary::load(p.string());
    CHECK(v2.content_hash() == v.content_hash());
    CHECK(v2.encode("dog") == v.encode("dog"));
}

TEST_CASE("make_batches") {
    SECTION("homogeneous batches, everything covered") {
        auto batches = make_batches(4, 2, 2, 99);
        CHECK(batches.size() == 3);
        std::multiset<std::size_t> paired_seen, unpaired_seen;
        for (const auto& b : batches) {
            CHECK((b.indices.size() == 2));
            for (auto i : b.indices) (b.paired ? paired_seen : unpaired_seen).insert(i);
        }
        CHECK(paired_seen == std::multiset<std::size_t>{0, 1, 2, 3});
        CHECK(unpaired_seen == std::multiset<std::size_t>{0, 1});
    }

    SECTION("same seed, same sequence") {
        auto a = make_batches(13, 7, 3, 42);
        auto b = make_batches(13, 7, 3, 42);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].paired == b[i].paired);
            CHECK(a[i].indices == b[i].indices);
        }
    }

    SECTION("epoch coverage with trailing partial batch") {
        auto batches = make_batches(5, 0, 2, 7);
        std::multiset<std::size_t> seen;
        std::size_t n_small = 0;
        for (const auto& b : batches) {
            CHECK(b.paired);
            if (b.indices.size() == 1) ++n_small;
            for (auto i : b.indices) seen.insert(i);
        }
        CHECK(seen == std::multiset<std::size_t>{0, 1, 2, 3, 4});
        CHECK(n_small == 1);
    }

    SECTION("invalid batch size") {
        CHECK_THROWS_AS(make_batches(4, 2, 0, 1), std::invalid_argument);
    }
}
