#include "gridvqa/metrics.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "gridvqa/errors.hpp"
#include "gridvqa/grid_encoder.hpp"
#include "gridvqa/log.hpp"
#include "gridvqa/text.hpp"

namespace gridvqa {

using nlohmann::json;

namespace {

std::size_t levenshtein_codepoints(const std::u32string& a, const std::u32string& b) {
    if (a.size() < b.size()) return levenshtein_codepoints(b, a);
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            const std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
            row[j] = std::min({up + 1, row[j - 1] + 1, sub});
            diag = up;
        }
    }
    return row[b.size()];
}

}  // namespace

std::size_t levenshtein(std::string_view a, std::string_view b) {
    return levenshtein_codepoints(utf8_decode(a), utf8_decode(b));
}

double nls(std::string_view pred, std::string_view gt, std::optional<double> threshold) {
    const auto p = utf8_decode(fold(pred));
    const auto g = utf8_decode(fold(gt));
    const std::size_t longest = std::max(p.size(), g.size());
    if (longest == 0) return 1.0;
    const double s = 1.0 - static_cast<double>(levenshtein_codepoints(p, g)) / static_cast<double>(longest);
    if (threshold && s < *threshold) return 0.0;
    return s;
}

EvalReport score_anls(const std::map<std::string, std::string>& predictions,
                      const std::vector<QaExample>& examples, const ScoreOptions& options) {
    EvalReport report;
    double sum = 0.0, subset_sum = 0.0;
    std::size_t correct = 0, subset_correct = 0;
    for (const auto& ex : examples) {
        ExampleScore s;
        s.question_id = ex.question_id;
        if (auto it = predictions.find(ex.question_id); it != predictions.end()) s.prediction = it->second;
        s.nls = -1.0;
        for (const auto& gt : ex.answers) {
            const double v = nls(s.prediction, gt, options.anls_threshold);
            if (v > s.nls) {
                s.nls = v;
                s.best_ground_truth = gt;
            }
            if (fold(s.prediction) == fold(gt)) s.correct = true;
        }
        s.nls = std::max(s.nls, 0.0);
        s.answer_in_ocr = !ground_truth_match(ex).empty();
        sum += s.nls;
        correct += s.correct;
        if (s.answer_in_ocr) {
            ++report.answer_in_ocr.count;
            subset_sum += s.nls;
            subset_correct += s.correct;
        }
        report.examples.push_back(std::move(s));
    }
    if (!examples.empty()) {
        const auto n = static_cast<double>(examples.size());
        report.anls = sum / n;
        report.accuracy = 100.0 * static_cast<double>(correct) / n;
    }
    if (report.answer_in_ocr.count > 0) {
        const auto n = static_cast<double>(report.answer_in_ocr.count);
        report.answer_in_ocr.anls = subset_sum / n;
        report.answer_in_ocr.accuracy = 100.0 * static_cast<double>(subset_correct) / n;
    }
    return report;
}

double vqa_accuracy(std::string_view pred, const std::vector<std::string>& human_answers) {
    if (human_answers.empty()) throw ContractError("vqa_accuracy needs at least one human answer");
    if (human_answers.size() != 10) {
        log::warn("vqa_accuracy expects 10 human answers, got " + std::to_string(human_answers.size()));
    }
    const std::string p = fold(pred);
    const auto h = std::count_if(human_answers.begin(), human_answers.end(),
                                 [&](const std::string& a) { return fold(a) == p; });
    return std::min(static_cast<double>(h) / 3.0, 1.0);
}

std::string oracle_answer(const QaExample& example, std::size_t max_join) {
    std::string best;
    double best_score = -1.0;
    for (std::size_t start = 0; start < example.ocr.size(); ++start) {
        std::string joined;
        for (std::size_t len = 1; len <= max_join && start + len <= example.ocr.size(); ++len) {
            if (len > 1) joined += ' ';
            joined += trim(example.ocr[start + len - 1].text);
            for (const auto& gt : example.answers) {
                const double s = nls(joined, gt);
                if (s > best_score) {
                    best_score = s;
                    best = joined;
                }
            }
        }
    }
    return best;
}

RecallResult answer_recall(const std::vector<QaExample>& examples, std::size_t max_join) {
    RecallResult r;
    if (examples.empty()) return r;
    std::size_t found = 0;
    std::map<std::string, std::string> oracle;
    for (const auto& ex : examples) {
        if (!ground_truth_match(ex).empty()) ++found;
        oracle[ex.question_id] = oracle_answer(ex, max_join);
    }
    r.recall = 100.0 * static_cast<double>(found) / static_cast<double>(examples.size());
    r.upper_bound = score_anls(oracle, examples).anls;
    return r;
}

std::vector<EnsembleChoice> ensemble_select(const std::vector<EnsembleInput>& inputs, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("ensemble threshold must lie in [0, 1]");
    std::vector<EnsembleChoice> out;
    out.reserve(inputs.size());
    for (const auto& in : inputs) {
        const bool use_classifier = in.classifier_confidence > tau;
        out.push_back({in.question_id, use_classifier ? in.classifier_answer : in.pointer_answer, use_classifier});
    }
    return out;
}

void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRecord>& records) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open predictions file for writing: " + path.string());
    for (const auto& r : records) {
        os << json{{"question_id", r.question_id}, {"answer", r.answer}, {"confidence", r.confidence}}.dump() << '\n';
    }
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw LookupError("cannot open predictions file: " + path.string());
    std::vector<PredictionRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error&) {
            throw ParseError(where + ": not a JSON record");
        }
        if (!rec.is_object() || !rec.contains("question_id") || !rec.contains("answer")) {
            throw ParseError(where + ": record needs \"question_id\" and \"answer\"");
        }
        PredictionRecord r;
        const auto& qid = rec["question_id"];
        r.question_id = qid.is_string() ? qid.get<std::string>() : qid.dump();
        if (!rec["answer"].is_string()) throw ParseError(where + ": \"answer\" must be a string");
        r.answer = rec["answer"].get<std::string>();
        if (rec.contains("confidence")) {
            if (!rec["confidence"].is_number()) throw ParseError(where + ": \"confidence\" must be a number");
            r.confidence = rec["confidence"].get<double>();
            if (r.confidence < 0.0 || r.confidence > 1.0) throw ParseError(where + ": confidence outside [0, 1]");
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::string report_to_json(const EvalReport& report, int indent) {
    json rows = json::array();
    for (const auto& e : report.examples) {
        rows.push_back({{"question_id", e.question_id},
                        {"prediction", e.prediction},
                        {"best_ground_truth", e.best_ground_truth},
                        {"nls", e.nls},
                        {"correct", e.correct},
                        {"answer_in_ocr", e.answer_in_ocr}});
    }
    json doc{{"anls", report.anls},
             {"accuracy", report.accuracy},
             {"count", report.examples.size()},
             {"answer_in_ocr", {{"count", report.answer_in_ocr.count},
                                {"anls", report.answer_in_ocr.anls},
                                {"accuracy", report.answer_in_ocr.accuracy}}},
             {"examples", std::move(rows)}};
    return doc.dump(indent);
}

}  // namespace gridvqa
