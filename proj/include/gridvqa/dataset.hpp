#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace gridvqa {

/// Axis-aligned box in normalised image coordinates, [0, 1] on both axes.
struct Box {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    double area() const { return (x1 - x0) * (y1 - y0); }
    bool valid() const;
    friend bool operator==(const Box&, const Box&) = default;
};

struct OcrToken {
    std::string text;
    Box box;
    friend bool operator==(const OcrToken&, const OcrToken&) = default;
};

struct QaExample {
    std::string question_id;
    std::string image_id;
    std::vector<std::string> question;
    std::vector<std::string> answers;
    std::vector<OcrToken> ocr;
    friend bool operator==(const QaExample&, const QaExample&) = default;
};

// Parses the annotation document. Every record is validated; the first
// violation raises ParseError naming the example index and field. Missing
// "question_id" fields default to the example's index.
std::vector<QaExample> parse_dataset(const std::string& json_text);
std::vector<QaExample> load_dataset(const std::filesystem::path& path);

std::string serialize_dataset(const std::vector<QaExample>& examples);
void save_dataset(const std::filesystem::path& path, const std::vector<QaExample>& examples);

struct FilterResult {
    std::vector<QaExample> kept;
    std::vector<QaExample> discarded;
    std::vector<std::string> reasons;  // one per discarded example
};

// Keeps examples with at least one ground-truth answer formed by consecutive
// OCR tokens.
FilterResult filter_trainable(const std::vector<QaExample>& examples);

}  // namespace gridvqa
