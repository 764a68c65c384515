#include <gtest/gtest.h>

#include "gridvqa/errors.hpp"
#include "gridvqa/grad_check.hpp"
#include "gridvqa/question_encoder.hpp"
#include "oracles.hpp"

using namespace gridvqa;

namespace {

std::vector<Tensor<double>> random_words(std::size_t n, std::size_t dim, Rng& rng) {
    std::vector<Tensor<double>> out;
    for (std::size_t i = 0; i < n; ++i) {
        Tensor<double> w({dim});
        for (auto& v : w.values()) v = rng.uniform(-1.0, 1.0);
        out.push_back(std::move(w));
    }
    return out;
}

}  // namespace

TEST(Preprocess, LowercaseAndStripPunctuation) {
    const auto w = preprocess_question({"What's", "the", "NAME?", "--"}, 30);
    EXPECT_EQ(w, (std::vector<std::string>{"whats", "the", "name"}));
}

TEST(Preprocess, TruncatesLongQuestions) {
    std::vector<std::string> words(40, "word");
    EXPECT_EQ(preprocess_question(words, 30).size(), 30u);
}

TEST(QuestionEncoder, OutputWidthIndependentOfLength) {
    auto cfg = ModelConfig::full_scale();
    cfg.embedding_dim = 20;  // keeps the test quick; the width under test is q_dim
    Rng rng(1);
    QuestionEncoder<float> enc(cfg, rng);
    EmbeddingTable table(20);
    for (std::size_t n : {1u, 4u, 12u}) {
        std::vector<std::string> q(n, "tent");
        EXPECT_EQ(encode_question(enc, table, q, Mode::Eval, rng).shape(), (Shape{1024}));
    }
}

TEST(QuestionEncoder, ZeroParametersGiveZeroVector) {
    auto cfg = oracle::tiny_config();
    Rng rng(2);
    QuestionEncoder<double> enc(cfg, rng);
    for (auto* p : {&enc.lstm1, &enc.lstm2, &enc.projection}) {
        p->weight.fill(0.0);
        p->bias.fill(0.0);
    }
    const auto out = enc.forward(random_words(5, cfg.embedding_dim, rng), Mode::Eval, rng);
    for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(QuestionEncoder, EmptyQuestionViolatesContract) {
    auto cfg = oracle::tiny_config();
    Rng rng(2);
    QuestionEncoder<double> enc(cfg, rng);
    EXPECT_THROW(enc.forward({}, Mode::Eval, rng), ContractError);
}

TEST(QuestionEncoder, WordOrderMatters) {
    ModelConfig cfg;
    Rng rng(5);
    QuestionEncoder<float> enc(cfg, rng);
    EmbeddingTable table(cfg.embedding_dim);
    std::vector<std::string> q = {"what", "brand", "name", "is", "on", "the", "tent"};
    const auto forward = encode_question(enc, table, q, Mode::Eval, rng);
    std::reverse(q.begin(), q.end());
    EXPECT_NE(encode_question(enc, table, q, Mode::Eval, rng), forward);
}

TEST(QuestionEncoder, EvalModeIgnoresDropout) {
    ModelConfig cfg;
    Rng init(5), a(1), b(2);
    QuestionEncoder<float> enc(cfg, init);
    EmbeddingTable table(cfg.embedding_dim);
    const std::vector<std::string> q = {"which", "city"};
    EXPECT_EQ(encode_question(enc, table, q, Mode::Eval, a), encode_question(enc, table, q, Mode::Eval, b));
    EXPECT_NE(encode_question(enc, table, q, Mode::Train, a), encode_question(enc, table, q, Mode::Train, b));
}

TEST(QuestionEncoder, GradientCheckWithDropout) {
    const auto cfg = oracle::tiny_config();
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        Rng rng(seed);
        QuestionEncoder<double> enc(cfg, rng);
        const auto words = random_words(4, cfg.embedding_dim, rng);
        Tensor<double> r({cfg.question_dim});
        for (auto& v : r.values()) v = rng.uniform(-1.0, 1.0);
        auto loss = [&](bool backward) {
            Rng drop(seed * 7 + 1);
            QuestionEncoder<double>::Cache cache;
            const auto out = enc.forward(words, Mode::Train, drop, &cache);
            if (backward) enc.backward(cache, r);
            double s = 0.0;
            for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * r[i];
            return s;
        };
        const auto res = grad_check(loss, enc.params("q"));
        EXPECT_LE(res.max_relative_error, 1e-4) << "seed " << seed << " worst " << res.worst_param;
    }
}
