#include "gridvqa/dataset.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gridvqa/errors.hpp"
#include "gridvqa/grid_encoder.hpp"
#include "gridvqa/text.hpp"

namespace gridvqa {

using nlohmann::json;

bool Box::valid() const {
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    return in_unit(x0) && in_unit(y0) && in_unit(x1) && in_unit(y1) && x0 < x1 && y0 < y1;
}

namespace {

[[noreturn]] void fail(std::size_t index, const std::string& field, const std::string& why) {
    throw ParseError("example " + std::to_string(index) + ", field \"" + field + "\": " + why);
}

const json& require(const json& obj, std::size_t index, const char* field) {
    auto it = obj.find(field);
    if (it == obj.end()) fail(index, field, "missing");
    return *it;
}

std::string require_string(const json& obj, std::size_t index, const char* field) {
    const json& v = require(obj, index, field);
    if (!v.is_string()) fail(index, field, "expected a string");
    return v.get<std::string>();
}

QaExample parse_example(const json& rec, std::size_t index) {
    if (!rec.is_object()) fail(index, "", "record is not an object");
    QaExample ex;
    if (auto it = rec.find("question_id"); it != rec.end()) {
        if (it->is_string()) ex.question_id = it->get<std::string>();
        else if (it->is_number_integer()) ex.question_id = std::to_string(it->get<long long>());
        else fail(index, "question_id", "expected a string or integer");
    } else {
        ex.question_id = std::to_string(index);
    }
    ex.image_id = require_string(rec, index, "image_id");
    if (trim(ex.image_id).empty()) fail(index, "image_id", "empty");
    ex.question = split_whitespace(require_string(rec, index, "question"));
    if (ex.question.empty()) fail(index, "question", "no words");

    const json& answers = require(rec, index, "answers");
    if (!answers.is_array() || answers.empty()) fail(index, "answers", "expected a non-empty array");
    for (const auto& a : answers) {
        if (!a.is_string()) fail(index, "answers", "expected strings");
        ex.answers.push_back(a.get<std::string>());
    }

    const json& ocr = require(rec, index, "ocr");
    if (!ocr.is_array()) fail(index, "ocr", "expected an array");
    for (const auto& t : ocr) {
        if (!t.is_object()) fail(index, "ocr", "token is not an object");
        OcrToken tok;
        tok.text = require_string(t, index, "text");
        if (trim(tok.text).empty()) fail(index, "text", "empty after trimming");
        const json& b = require(t, index, "box");
        if (!b.is_array() || b.size() != 4) fail(index, "box", "expected [x0, y0, x1, y1]");
        for (const auto& v : b) {
            if (!v.is_number()) fail(index, "box", "non-numeric coordinate");
        }
        tok.box = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
        if (!tok.box.valid()) {
            std::ostringstream why;
            why << "invalid box [" << tok.box.x0 << ", " << tok.box.y0 << ", " << tok.box.x1 << ", "
                << tok.box.y1 << "] (need 0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1)";
            fail(index, "box", why.str());
        }
        ex.ocr.push_back(std::move(tok));
    }
    return ex;
}

}  // namespace

std::vector<QaExample> parse_dataset(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("dataset is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("examples") || !doc["examples"].is_array()) {
        throw ParseError("dataset must be an object with an \"examples\" array");
    }
    std::vector<QaExample> out;
    const auto& arr = doc["examples"];
    out.reserve(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(parse_example(arr[i], i));
    return out;
}

std::vector<QaExample> load_dataset(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw LookupError("cannot open dataset: " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_dataset(ss.str());
}

std::string serialize_dataset(const std::vector<QaExample>& examples) {
    json arr = json::array();
    for (const auto& ex : examples) {
        json ocr = json::array();
        for (const auto& t : ex.ocr) {
            ocr.push_back({{"text", t.text}, {"box", {t.box.x0, t.box.y0, t.box.x1, t.box.y1}}});
        }
        arr.push_back({{"question_id", ex.question_id},
                       {"image_id", ex.image_id},
                       {"question", join(ex.question, " ")},
                       {"answers", ex.answers},
                       {"ocr", std::move(ocr)}});
    }
    return json{{"examples", std::move(arr)}}.dump(1);
}

void save_dataset(const std::filesystem::path& path, const std::vector<QaExample>& examples) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open dataset for writing: " + path.string());
    os << serialize_dataset(examples) << '\n';
}

FilterResult filter_trainable(const std::vector<QaExample>& examples) {
    FilterResult r;
    for (const auto& ex : examples) {
        if (ex.ocr.empty()) {
            r.discarded.push_back(ex);
            r.reasons.push_back("question " + ex.question_id + ": no OCR tokens");
        } else if (ground_truth_match(ex).empty()) {
            r.discarded.push_back(ex);
            r.reasons.push_back("question " + ex.question_id + ": no answer among OCR tokens");
        } else {
            r.kept.push_back(ex);
        }
    }
    return r;
}

}  // namespace gridvqa
