#pragma once

#include <string>
#include <vector>

#include "gridvqa/embedding.hpp"
#include "gridvqa/layers.hpp"
#include "gridvqa/model_config.hpp"
#include "gridvqa/params.hpp"

namespace gridvqa {

// Lowercases, strips ASCII punctuation, drops words left empty and truncates
// to `max_length` words (with a warning).
std::vector<std::string> preprocess_question(const std::vector<std::string>& words,
                                             std::size_t max_length);

/// Two stacked LSTM layers run from a zero state over the word vectors, with
/// dropout on the first layer's outputs and on the final hidden state, then a
/// dense projection to question_dim.
template <typename T>
class QuestionEncoder {
public:
    struct Cache {
        std::vector<LstmCache<T>> layer1, layer2;
        std::vector<Tensor<T>> drop1_mask;
        Tensor<T> drop2_mask;
        Tensor<T> final_dropped;
    };

    QuestionEncoder() = default;
    QuestionEncoder(const ModelConfig& cfg, Rng& rng);

    Tensor<T> forward(const std::vector<Tensor<T>>& words, Mode mode, Rng& rng, Cache* cache = nullptr) const;

    // Accumulates parameter gradients for dL/d(output) = d_out.
    void backward(const Cache& cache, const Tensor<T>& d_out);

    std::vector<ParamRef<T>> params(const std::string& prefix);

    std::size_t output_dim() const { return projection.weight.extent(1); }

    LayerParams<T> lstm1, lstm2, projection;
    double dropout_rate = 0.5;
};

// Embeds the preprocessed question with `table` (as T) in sequence order.
template <typename T>
std::vector<Tensor<T>> embed_question(const EmbeddingTable& table, const std::vector<std::string>& question,
                                      std::size_t max_length);

template <typename T>
Tensor<T> encode_question(const QuestionEncoder<T>& encoder, const EmbeddingTable& table,
                          const std::vector<std::string>& question, Mode mode, Rng& rng,
                          std::size_t max_length = 30) {
    return encoder.forward(embed_question<T>(table, question, max_length), mode, rng);
}

}  // namespace gridvqa
