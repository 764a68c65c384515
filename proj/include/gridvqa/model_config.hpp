#pragma once

#include <cstddef>
#include <string>

namespace gridvqa {

enum class StackMode { Single, Stacked, Fcn };

std::string to_string(StackMode m);
StackMode parse_stack_mode(const std::string& s);

/// Layer widths of the full model. The defaults are a compact configuration
/// that trains on one CPU core; full_scale() gives the widths of the original
/// architecture (38x38x512 visual grid, 300-d word vectors, 2x256 LSTM,
/// 1024-d question vector, 1024/512 attention convolutions).
struct ModelConfig {
    std::size_t visual_channels = 16;
    std::size_t embedding_dim = 50;
    std::size_t lstm_hidden = 32;
    std::size_t question_dim = 64;
    std::size_t attention_hidden = 64;  // first 1x1 conv on the fused grid
    std::size_t attention_dim = 32;     // second 1x1 conv and question dense
    std::size_t fcn_channels1 = 32;
    std::size_t fcn_channels2 = 16;
    double dropout = 0.5;
    std::size_t max_question_length = 30;
    StackMode stack = StackMode::Stacked;

    std::size_t fused_channels() const { return visual_channels + embedding_dim; }

    static ModelConfig full_scale() {
        ModelConfig c;
        c.visual_channels = 512;
        c.embedding_dim = 300;
        c.lstm_hidden = 256;
        c.question_dim = 1024;
        c.attention_hidden = 1024;
        c.attention_dim = 512;
        c.fcn_channels1 = 512;
        c.fcn_channels2 = 256;
        return c;
    }

    void validate() const;
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace gridvqa
