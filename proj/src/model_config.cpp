#include "gridvqa/model_config.hpp"

#include "gridvqa/errors.hpp"

namespace gridvqa {

std::string to_string(StackMode m) {
    switch (m) {
        case StackMode::Single: return "single";
        case StackMode::Stacked: return "stacked";
        case StackMode::Fcn: return "fcn";
    }
    return "stacked";
}

StackMode parse_stack_mode(const std::string& s) {
    if (s == "single") return StackMode::Single;
    if (s == "stacked") return StackMode::Stacked;
    if (s == "fcn") return StackMode::Fcn;
    throw ConfigError("unknown stack mode \"" + s + "\" (expected single, stacked or fcn)");
}

void ModelConfig::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v == 0) throw ConfigError(std::string(name) + " must be positive");
    };
    positive(visual_channels, "visual_channels");
    positive(embedding_dim, "embedding_dim");
    positive(lstm_hidden, "lstm_hidden");
    positive(question_dim, "question_dim");
    positive(attention_hidden, "attention_hidden");
    positive(attention_dim, "attention_dim");
    positive(fcn_channels1, "fcn_channels1");
    positive(fcn_channels2, "fcn_channels2");
    positive(max_question_length, "max_question_length");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
}

}  // namespace gridvqa
