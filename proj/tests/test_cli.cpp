#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gridvqa/cli.hpp"
#include "gridvqa/dataset.hpp"
#include "gridvqa/image.hpp"
#include "gridvqa/metrics.hpp"
#include "gridvqa/run_config.hpp"

namespace fs = std::filesystem;
using namespace gridvqa;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "gridvqa");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("gridvqa_cli_" + std::string(
                                               ::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    // Small synthetic corpus plus a short training run.
    void make_corpus(std::size_t count = 12) {
        ASSERT_EQ(run({"synth", "--out", (dir_ / "data").string(), "--count", std::to_string(count), "--grid-size",
                       "8", "--quiet"})
                      .code,
                  0);
    }
    Result train(const std::string& out, std::vector<std::string> extra = {}) {
        std::vector<std::string> args = {"train", "--config", (dir_ / "data" / "config.json").string(),
                                         "--out", (dir_ / out).string(), "--epochs", "2", "--quiet"};
        args.insert(args.end(), extra.begin(), extra.end());
        return run(args);
    }

    fs::path dir_;
};

}  // namespace

TEST_F(CliTest, MissingDatasetExitsWithUsageCode) {
    const auto missing = (dir_ / "nowhere.json").string();
    const auto r = run({"train", "--dataset", missing, "--embeddings", missing});
    EXPECT_EQ(r.code, cli::kExitUsage);
    EXPECT_NE(r.err.find(missing), std::string::npos) << r.err;
}

TEST_F(CliTest, UnknownStackModeIsUsageError) {
    EXPECT_EQ(run({"train", "--stack", "triple"}).code, cli::kExitUsage);
}

TEST_F(CliTest, SynthIsDeterministicAndFullyTrainable) {
    make_corpus();
    ASSERT_EQ(run({"synth", "--out", (dir_ / "again").string(), "--count", "12", "--grid-size", "8", "--quiet"}).code, 0);
    for (const char* f : {"dataset.json", "features.gfea", "embeddings.txt", "config.json"}) {
        EXPECT_EQ(slurp(dir_ / "data" / f), slurp(dir_ / "again" / f)) << f;
    }
    const auto examples = load_dataset(dir_ / "data" / "dataset.json");
    EXPECT_EQ(examples.size(), 12u);
    EXPECT_EQ(filter_trainable(examples).discarded.size(), 0u);
    const auto r = answer_recall(examples);
    EXPECT_DOUBLE_EQ(r.recall, 100.0);
    EXPECT_DOUBLE_EQ(r.upper_bound, 1.0);
}

TEST_F(CliTest, TrainWritesLoadableCheckpointAndIsDeterministic) {
    make_corpus();
    const auto a = train("run_a");
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(train("run_b").code, 0);
    EXPECT_EQ(slurp(dir_ / "run_a" / "model.ckpt"), slurp(dir_ / "run_b" / "model.ckpt"));
    EXPECT_EQ(slurp(dir_ / "run_a" / "train_log.jsonl"), slurp(dir_ / "run_b" / "train_log.jsonl"));
    EXPECT_TRUE(fs::exists(dir_ / "run_a" / "summary.json"));

    // The written config drives eval against the checkpoint it names.
    const auto cfg = load_run_config(dir_ / "run_a" / "config.json");
    EXPECT_EQ(cfg.grid, 8u);
    const auto e = run({"eval", "--config", (dir_ / "run_a" / "config.json").string(), "--quiet"});
    EXPECT_EQ(e.code, 0) << e.err;
    const auto report = nlohmann::json::parse(slurp(dir_ / "run_a" / "report.json"));
    EXPECT_GE(report["anls"].get<double>(), 0.0);
}

TEST_F(CliTest, TrainPrintsDiscardCount) {
    make_corpus();
    const auto r = run({"train", "--config", (dir_ / "data" / "config.json").string(), "--out",
                        (dir_ / "run").string(), "--epochs", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("discarded 0"), std::string::npos) << r.out;
}

TEST_F(CliTest, EvalOracleAndEmptyPredictions) {
    make_corpus();
    const auto examples = load_dataset(dir_ / "data" / "dataset.json");
    std::vector<PredictionRecord> oracle, empty;
    for (const auto& ex : examples) {
        oracle.push_back({ex.question_id, ex.answers[0], 1.0});
        empty.push_back({ex.question_id, "", 0.0});
    }
    write_predictions(dir_ / "oracle.jsonl", oracle);
    write_predictions(dir_ / "empty.jsonl", empty);
    const auto dataset = (dir_ / "data" / "dataset.json").string();
    ASSERT_EQ(run({"eval", "--dataset", dataset, "--predictions", (dir_ / "oracle.jsonl").string(), "--report",
                   (dir_ / "r1.json").string(), "--quiet"})
                  .code,
              0);
    ASSERT_EQ(run({"eval", "--dataset", dataset, "--predictions", (dir_ / "empty.jsonl").string(), "--report",
                   (dir_ / "r2.json").string(), "--quiet"})
                  .code,
              0);
    EXPECT_DOUBLE_EQ(nlohmann::json::parse(slurp(dir_ / "r1.json"))["anls"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(nlohmann::json::parse(slurp(dir_ / "r2.json"))["anls"].get<double>(), 0.0);
}

TEST_F(CliTest, EnsembleSwitchesExactlyConfidentQuestions) {
    make_corpus();
    const auto examples = load_dataset(dir_ / "data" / "dataset.json");
    std::vector<PredictionRecord> pointer, classifier;
    std::vector<std::string> expected;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& id = examples[i].question_id;
        const double conf = 0.05 + 0.08 * static_cast<double>(i);  // straddles 0.37
        pointer.push_back({id, "pointer", 0.5});
        classifier.push_back({id, "classifier", conf});
        if (conf > 0.37) expected.push_back(id);
    }
    write_predictions(dir_ / "ptr.jsonl", pointer);
    write_predictions(dir_ / "cls.jsonl", classifier);
    const auto r = run({"eval", "--dataset", (dir_ / "data" / "dataset.json").string(), "--predictions",
                        (dir_ / "ptr.jsonl").string(), "--ensemble-preds", (dir_ / "cls.jsonl").string(),
                        "--report", (dir_ / "ens.json").string(), "--quiet"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto report = nlohmann::json::parse(slurp(dir_ / "ens.json"));
    EXPECT_EQ(report["ensemble"]["from_classifier"].get<std::vector<std::string>>(), expected);
    for (const auto& row : report["examples"]) {
        const bool switched = std::find(expected.begin(), expected.end(), row["question_id"]) != expected.end();
        EXPECT_EQ(row["prediction"].get<std::string>(), switched ? "classifier" : "pointer");
    }
}

TEST_F(CliTest, PredictAndMultiscaleFiles) {
    make_corpus();
    ASSERT_EQ(train("run").code, 0);
    const auto cfg = (dir_ / "run" / "config.json").string();
    ASSERT_EQ(run({"predict", "--config", cfg, "--quiet"}).code, 0);
    EXPECT_EQ(read_predictions(dir_ / "run" / "predictions.jsonl").size(), 12u);

    // The synthetic corpus only has features at G = 8.
    EXPECT_EQ(run({"predict", "--config", cfg, "--scales", "8,16", "--quiet"}).code, cli::kExitUsage);
    ASSERT_EQ(run({"predict", "--config", cfg, "--features", "", "--scales", "8,16", "--quiet"}).code, 0);
    EXPECT_TRUE(fs::exists(dir_ / "run" / "predictions_g8.jsonl"));
    EXPECT_TRUE(fs::exists(dir_ / "run" / "predictions_g16.jsonl"));
}

TEST_F(CliTest, VizWritesUpsampledImage) {
    make_corpus();
    ASSERT_EQ(train("run").code, 0);
    const auto img_path = dir_ / "att.pgm";
    const auto r = run({"viz", "--config", (dir_ / "run" / "config.json").string(), "--question-id", "3",
                        "--image", img_path.string(), "--quiet"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto img = read_pgm(img_path);
    EXPECT_EQ(img.width, 8u * 16u);
    EXPECT_EQ(img.height, 8u * 16u);

    ASSERT_EQ(run({"viz", "--config", (dir_ / "run" / "config.json").string(), "--image",
                   (dir_ / "att.txt.pgm").string(), "--ascii", "--quiet"})
                  .code,
              0);
    EXPECT_EQ(slurp(dir_ / "att.txt.pgm").substr(0, 2), "P2");
    EXPECT_EQ(run({"viz", "--config", (dir_ / "run" / "config.json").string(), "--question-id", "nope", "--quiet"})
                  .code,
              cli::kExitUsage);
}

TEST_F(CliTest, EvalRejectsIncompatibleCheckpoint) {
    make_corpus();
    ASSERT_EQ(train("run").code, 0);
    const auto r = run({"eval", "--config", (dir_ / "run" / "config.json").string(), "--stack", "fcn", "--quiet"});
    EXPECT_EQ(r.code, cli::kExitUsage);
    EXPECT_NE(r.err.find("incompatible"), std::string::npos) << r.err;
}

TEST_F(CliTest, AnalyzeReportsRecall) {
    make_corpus();
    const auto r = run({"analyze", "--dataset", (dir_ / "data" / "dataset.json").string(), "--report",
                        (dir_ / "recall.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("answer recall 100.00%"), std::string::npos) << r.out;
    EXPECT_DOUBLE_EQ(nlohmann::json::parse(slurp(dir_ / "recall.json"))["anls_upper_bound"].get<double>(), 1.0);
}

TEST_F(CliTest, ConfigRoundTrip) {
    RunConfig c;
    c.dataset = dir_ / "d.json";
    c.grid = 38;
    c.model.stack = StackMode::Single;
    c.anls_threshold = 0.5;
    c.ensemble_tau = 0.6;
    c.learning_rate = 3e-4;
    c.output_dir = dir_ / "out";
    save_run_config(dir_ / "c.json", c);
    EXPECT_EQ(load_run_config(dir_ / "c.json"), c);

    // a relative path is pinned to the working directory, not the file
    c.checkpoint = "rel/model.ckpt";
    save_run_config(dir_ / "c.json", c);
    EXPECT_EQ(load_run_config(dir_ / "c.json").checkpoint, std::filesystem::absolute("rel/model.ckpt"));
}

TEST(ImageExport, UniformAndPeakedMaps) {
    const auto flat = render_attention(Tensor<float>({3, 3}, 0.5f), 4);
    for (auto px : flat.pixels) EXPECT_EQ(px, 128);

    Tensor<float> peak({3, 3}, 0.1f);
    peak.at(1, 2) = 0.9f;
    const auto img = render_attention(peak, 4);
    const auto brightest = *std::max_element(img.pixels.begin(), img.pixels.end());
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            EXPECT_EQ(img.at(x, y) == brightest, y / 4 == 1 && x / 4 == 2);
}
