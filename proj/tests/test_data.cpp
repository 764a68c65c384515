#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "gridvqa/dataset.hpp"
#include "gridvqa/embedding.hpp"
#include "gridvqa/errors.hpp"
#include "gridvqa/features.hpp"
#include "gridvqa/rng.hpp"
#include "gridvqa/synth.hpp"

using namespace gridvqa;

namespace {

const std::filesystem::path kData = GRIDVQA_TEST_DATA;

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("gridvqa_data_" + name);
}

QaExample example_with(std::vector<std::string> answers, std::vector<std::string> ocr) {
    QaExample ex;
    ex.question_id = "q";
    ex.image_id = "img";
    ex.question = {"what", "is", "it"};
    ex.answers = std::move(answers);
    double x = 0.0;
    for (auto& t : ocr) {
        ex.ocr.push_back({std::move(t), Box{x, 0.1, x + 0.1, 0.2}});
        x += 0.1;
    }
    return ex;
}

// Character n-grams of "<word>", as the hashing scheme defines them.
std::set<std::string> ngrams(const std::string& word) {
    const std::string w = "<" + word + ">";
    std::set<std::string> out;
    for (std::size_t n = 3; n <= 6; ++n)
        for (std::size_t i = 0; i + n <= w.size(); ++i) out.insert(w.substr(i, n));
    return out;
}

}  // namespace

TEST(Dataset, EmptyArray) {
    EXPECT_TRUE(parse_dataset(R"({"examples": []})").empty());
}

TEST(Dataset, BadBoxNamesExampleAndField) {
    try {
        load_dataset(kData / "three_examples_bad_box.json");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("example 1"), std::string::npos) << msg;
        EXPECT_NE(msg.find("\"box\""), std::string::npos) << msg;
    }
}

TEST(Dataset, MissingFieldIsNamed) {
    try {
        parse_dataset(R"({"examples": [{"image_id": "a", "answers": ["x"], "ocr": []}]})");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("\"question\""), std::string::npos) << e.what();
    }
}

TEST(Dataset, QuestionIdDefaultsToIndex) {
    const auto ex = parse_dataset(R"({"examples": [
        {"image_id": "a", "question": "what", "answers": ["x"], "ocr": []},
        {"image_id": "b", "question": "who", "answers": ["y"], "ocr": []}]})");
    ASSERT_EQ(ex.size(), 2u);
    EXPECT_EQ(ex[0].question_id, "0");
    EXPECT_EQ(ex[1].question_id, "1");
}

TEST(Dataset, RoundTrip) {
    const auto loaded = load_dataset(kData / "ten_examples.json");
    ASSERT_EQ(loaded.size(), 10u);
    EXPECT_EQ(parse_dataset(serialize_dataset(loaded)), loaded);

    const auto path = temp_path("roundtrip.json");
    save_dataset(path, loaded);
    EXPECT_EQ(load_dataset(path), loaded);
    std::filesystem::remove(path);
}

TEST(Dataset, MissingFileIsLookupError) {
    EXPECT_THROW(load_dataset(temp_path("does_not_exist.json")), LookupError);
}

TEST(Filter, SingleTokenCaseInsensitiveKept) {
    const auto r = filter_trainable({example_with({"COLUMBIA"}, {"Columbia"})});
    EXPECT_EQ(r.kept.size(), 1u);
}

TEST(Filter, EmptyOcrDiscarded) {
    const auto r = filter_trainable({example_with({"stop"}, {})});
    EXPECT_EQ(r.kept.size(), 0u);
    ASSERT_EQ(r.discarded.size(), 1u);
    EXPECT_EQ(r.reasons.size(), 1u);
}

TEST(Filter, TenExampleFixture) {
    // Hand-labelled: a0 a1 a4 a6 a8 a9 are formable from consecutive tokens.
    const auto r = filter_trainable(load_dataset(kData / "ten_examples.json"));
    ASSERT_EQ(r.kept.size(), 6u);
    EXPECT_EQ(r.discarded.size(), 4u);
    std::vector<std::string> ids;
    for (const auto& ex : r.kept) ids.push_back(ex.question_id);
    EXPECT_EQ(ids, (std::vector<std::string>{"a0", "a1", "a4", "a6", "a8", "a9"}));
}

TEST(Embedding, StoredVectorExact) {
    EmbeddingTable t(3);
    t.insert("tent", {0.25f, -1.0f, 2.0f});
    EXPECT_EQ(t.embed("tent"), Tensor<float>::vector({0.25f, -1.0f, 2.0f}));
}

TEST(Embedding, OovIsDeterministic) {
    EmbeddingTable t(16);
    EXPECT_EQ(t.embed("stockport"), t.embed("stockport"));
    EXPECT_TRUE(t.embed("stockport").all_finite());
}

TEST(Embedding, EmptyStringIsZero) {
    EmbeddingTable t(5);
    EXPECT_EQ(t.embed(""), Tensor<float>({5}));
}

TEST(Embedding, OovMatchesHashingOracle) {
    EmbeddingTable t(8, OovHashing{3, 6, 1u << 15, 7});
    for (const std::string word : {"zq", "xylophone"}) {
        const auto grams = ngrams(word);
        // Bucket count equals the number of n-gram occurrences.
        std::size_t occurrences = 0;
        const std::string w = "<" + word + ">";
        for (std::size_t n = 3; n <= 6; ++n) occurrences += w.size() >= n ? w.size() - n + 1 : 0;
        const auto buckets = t.ngram_buckets(word);
        ASSERT_EQ(buckets.size(), occurrences);

        std::vector<double> mean(8, 0.0);
        for (auto b : buckets) {
            const auto v = t.bucket_vector(b);
            for (std::size_t i = 0; i < 8; ++i) mean[i] += v[i] / static_cast<double>(buckets.size());
        }
        const auto e = t.embed(word);
        for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(e[i], mean[i], 1e-6);
    }
}

TEST(Embedding, DisjointOovWordsDiffer) {
    EmbeddingTable t(8, OovHashing{3, 6, 1u << 15, 7});
    const auto a = ngrams("abc"), b = ngrams("xyz");
    for (const auto& g : a) ASSERT_EQ(b.count(g), 0u);
    EXPECT_NE(t.embed("abc"), t.embed("xyz"));
}

TEST(Embedding, BucketVectorsInRange) {
    EmbeddingTable t(25);
    for (std::uint32_t b : {0u, 17u, 32767u}) {
        for (float v : t.bucket_vector(b)) {
            EXPECT_LE(std::abs(v), 1.0f / 5.0f);
        }
    }
}

TEST(Embedding, LoadWithHeaderAndSaveRoundTrip) {
    const auto path = temp_path("emb.txt");
    {
        std::ofstream os(path);
        os << "2 3\nnew 1 2 3\nyork -1 0.5 0\n";
    }
    const auto t = EmbeddingTable::load(path);
    EXPECT_EQ(t.dimension(), 3u);
    EXPECT_EQ(t.vocabulary_size(), 2u);
    EXPECT_EQ(t.embed("york"), Tensor<float>::vector({-1.0f, 0.5f, 0.0f}));

    const auto again = temp_path("emb2.txt");
    t.save(again);
    const auto t2 = EmbeddingTable::load(again);
    EXPECT_EQ(t2.embed("new"), t.embed("new"));
    std::filesystem::remove(path);
    std::filesystem::remove(again);
}

TEST(Embedding, MalformedLineIsParseError) {
    const auto path = temp_path("bad_emb.txt");
    {
        std::ofstream os(path);
        os << "a 1 2 3\nb 1 2\n";
    }
    EXPECT_THROW(EmbeddingTable::load(path), ParseError);
    std::filesystem::remove(path);
}

TEST(Features, SyntheticIsDeterministic) {
    const auto fp = FeatureProvider::synthetic(7, 4, 1);
    EXPECT_EQ(fp.get("img"), fp.get("img"));
    EXPECT_NE(fp.get("img"), fp.get("other"));
    EXPECT_EQ(fp.get("img").shape(), (Shape{7, 7, 4}));
    EXPECT_EQ(fp.get("img", 11).shape(), (Shape{11, 11, 4}));
}

TEST(Features, FileModeFullScaleShape) {
    Rng rng(12);
    Tensor<float> big({38, 38, 512});
    for (auto& v : big.values()) v = static_cast<float>(rng.normal());
    const auto path = temp_path("big.gfea");
    write_feature_file(path, {{"COCO_1", big}});
    const auto fp = FeatureProvider::from_file(path);
    EXPECT_EQ(fp.get("COCO_1").shape(), (Shape{38, 38, 512}));
    EXPECT_EQ(fp.get("COCO_1"), big);
    std::filesystem::remove(path);
}

TEST(Features, UnknownIdNamesTheId) {
    const auto path = temp_path("small.gfea");
    write_feature_file(path, {{"known", Tensor<float>({4, 4, 2}, 1.0f)}});
    const auto fp = FeatureProvider::from_file(path);
    try {
        fp.get("missing_image_42");
        FAIL() << "expected LookupError";
    } catch (const LookupError& e) {
        EXPECT_NE(std::string(e.what()).find("missing_image_42"), std::string::npos);
    }
    EXPECT_THROW(fp.get("known", 8), LookupError);
    std::filesystem::remove(path);
}

namespace {

// Palette index named by the question, or -1.
int named_colour(const QaExample& ex) {
    for (const auto& w : ex.question)
        for (std::size_t k = 0; k < kSynthPalette.size(); ++k)
            if (w == kSynthPalette[k]) return static_cast<int>(k);
    return -1;
}

bool inside(const Box& b, std::size_t r, std::size_t c, std::size_t g) {
    const double x = (static_cast<double>(c) + 0.5) / static_cast<double>(g);
    const double y = (static_cast<double>(r) + 0.5) / static_cast<double>(g);
    return x > b.x0 && x < b.x1 && y > b.y0 && y < b.y1;
}

}  // namespace

TEST(Synth, OnlyAnswerCellsCarryTheNamedColour) {
    SynthConfig cfg;
    cfg.count = 30;
    const auto data = generate_synthetic(cfg);
    ASSERT_EQ(data.examples.size(), 30u);
    EXPECT_EQ(filter_trainable(data.examples).discarded.size(), 0u);
    for (std::size_t n = 0; n < data.examples.size(); ++n) {
        const auto& ex = data.examples[n];
        const auto& f = data.features[n].features;
        ASSERT_GE(ex.ocr.size(), cfg.min_tokens);
        ASSERT_LE(ex.ocr.size(), cfg.max_tokens);
        const int k = named_colour(ex);
        ASSERT_GE(k, 0) << ex.question_id;
        const Box* answer = nullptr;
        for (const auto& t : ex.ocr)
            if (t.text == ex.answers[0]) answer = &t.box;
        ASSERT_NE(answer, nullptr);
        // signal 2 against noise 0.1: a threshold of 1 never misfires at 10 sigma
        for (std::size_t r = 0; r < cfg.grid; ++r) {
            for (std::size_t c = 0; c < cfg.grid; ++c) {
                const bool lit = inside(*answer, r, c, cfg.grid);
                for (std::size_t ch = 0; ch < kSynthPalette.size(); ++ch) {
                    const bool expect = lit && ch == static_cast<std::size_t>(k);
                    EXPECT_EQ(f.at(r, c, ch) > 1.0f, expect) << ex.question_id << " cell " << r << "," << c;
                }
            }
        }
    }
}

TEST(Synth, DistractorModePaintsEveryWordDistinctly) {
    SynthConfig cfg;
    cfg.count = 10;
    cfg.color_distractors = true;
    const auto data = generate_synthetic(cfg);
    for (std::size_t n = 0; n < data.examples.size(); ++n) {
        const auto& ex = data.examples[n];
        const auto& f = data.features[n].features;
        std::set<std::size_t> seen;
        for (const auto& t : ex.ocr) {
            const auto r = static_cast<std::size_t>(t.box.y0 * cfg.grid + 0.5);
            const auto c = static_cast<std::size_t>(t.box.x0 * cfg.grid + 0.5);
            std::size_t lit = kSynthPalette.size();
            for (std::size_t ch = 0; ch < kSynthPalette.size(); ++ch)
                if (f.at(r, c, ch) > 1.0f) lit = ch;
            ASSERT_LT(lit, kSynthPalette.size());
            EXPECT_TRUE(seen.insert(lit).second);
            if (t.text == ex.answers[0]) EXPECT_EQ(static_cast<int>(lit), named_colour(ex));
        }
    }
}

TEST(Synth, ZeroCountIsRejected) {
    SynthConfig cfg;
    cfg.count = 0;
    EXPECT_THROW(generate_synthetic(cfg), ConfigError);
}
