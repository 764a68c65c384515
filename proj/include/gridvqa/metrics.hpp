#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gridvqa/dataset.hpp"

namespace gridvqa {

// Edit distance over Unicode code points (insert, delete, substitute all cost 1).
std::size_t levenshtein(std::string_view a, std::string_view b);

// 1 - levenshtein / max(len) on folded strings; 1.0 when both are empty.
// With a threshold, similarities below it score 0.
double nls(std::string_view pred, std::string_view gt, std::optional<double> threshold = std::nullopt);

struct ScoreOptions {
    std::optional<double> anls_threshold;  // off by default
};

struct ExampleScore {
    std::string question_id;
    std::string prediction;
    std::string best_ground_truth;
    double nls = 0.0;
    bool correct = false;        // exact match after folding
    bool answer_in_ocr = false;  // ground truth formable from OCR tokens
};

struct SubsetScore {
    std::size_t count = 0;
    double anls = 0.0;
    double accuracy = 0.0;  // percentage
};

struct EvalReport {
    double anls = 0.0;
    double accuracy = 0.0;  // percentage of exact matches
    std::vector<ExampleScore> examples;
    SubsetScore answer_in_ocr;  // only questions whose answer is among OCR tokens
};

// Per question the max similarity over its ground-truth answers, averaged.
// Questions missing from `predictions` are scored as the empty answer.
EvalReport score_anls(const std::map<std::string, std::string>& predictions,
                      const std::vector<QaExample>& examples, const ScoreOptions& options = {});

// min(#matching human answers / 3, 1) with folded exact matching.
double vqa_accuracy(std::string_view pred, const std::vector<std::string>& human_answers);

struct RecallResult {
    double recall = 0.0;       // percentage
    double upper_bound = 0.0;  // ANLS of the best consecutive-join oracle
};

inline constexpr std::size_t kMaxOracleJoin = 4;

// Best consecutive OCR join (up to kMaxOracleJoin tokens) against any ground truth.
std::string oracle_answer(const QaExample& example, std::size_t max_join = kMaxOracleJoin);

RecallResult answer_recall(const std::vector<QaExample>& examples, std::size_t max_join = kMaxOracleJoin);

// ---------------------------------------------------------------------------
// Ensemble with a fixed-vocabulary classifier
// ---------------------------------------------------------------------------

inline constexpr double kDefaultEnsembleThreshold = 0.37;

struct EnsembleInput {
    std::string question_id;
    std::string classifier_answer;
    double classifier_confidence = 0.0;
    std::string pointer_answer;
    double pointer_confidence = 0.0;
};

struct EnsembleChoice {
    std::string question_id;
    std::string answer;
    bool from_classifier = false;
};

// Classifier answer iff its confidence > tau, pointer answer otherwise.
std::vector<EnsembleChoice> ensemble_select(const std::vector<EnsembleInput>& inputs,
                                            double tau = kDefaultEnsembleThreshold);

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

struct PredictionRecord {
    std::string question_id;
    std::string answer;
    double confidence = 0.0;
    friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

// Line-delimited JSON: {"question_id", "answer", "confidence"} per line.
void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

std::string report_to_json(const EvalReport& report, int indent = 1);

}  // namespace gridvqa
