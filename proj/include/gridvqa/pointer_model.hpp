#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gridvqa/checkpoint.hpp"
#include "gridvqa/features.hpp"
#include "gridvqa/grid_encoder.hpp"
#include "gridvqa/question_encoder.hpp"

namespace gridvqa {

/// One multimodal attention layer:
///   m_att = conv_b(tanh(conv_a(f_m)))        1x1 convs
///   q_att = tile(tanh(dense_q(f_q)))
///   p_att = sigmoid(conv_out(tanh(m_att + q_att)))
/// Every spatial operator is 1x1 so the layer runs at any grid size.
template <typename T>
struct AttentionLayer {
    struct Cache {
        Tensor<T> f_q;
        Tensor<T> hidden;    // tanh(conv_a(f_m))
        Tensor<T> q_act;     // tanh(dense_q(f_q))
        Tensor<T> joint;     // tanh(m_att + q_att)
        Tensor<T> p;         // [G, G]
    };

    AttentionLayer() = default;
    AttentionLayer(const ModelConfig& cfg, Rng& rng);

    Tensor<T> forward(const Tensor<T>& f_m, const Tensor<T>& f_q, Cache* cache = nullptr) const;

    // d_logit is dL/d(pre-sigmoid map). Returns dL/d(f_q).
    Tensor<T> backward(const Tensor<T>& f_m, const Cache& cache, const Tensor<T>& d_logit);

    std::vector<ParamRef<T>> params(const std::string& prefix);

    LayerParams<T> conv_a, conv_b, dense_q, conv_out;
};

/// Fully convolutional baseline: three same-padded 3x3 convs over
/// [f_m; tile(f_q)], ReLU + channel normalisation after the first two,
/// sigmoid after the last.
template <typename T>
struct FcnHead {
    struct Cache {
        Tensor<T> input, relu1, norm1, relu2, norm2, p;
        ChannelNormCache<T> norm1_cache, norm2_cache;
        std::size_t question_width = 0;
    };

    FcnHead() = default;
    FcnHead(const ModelConfig& cfg, Rng& rng);

    Tensor<T> forward(const Tensor<T>& f_m, const Tensor<T>& f_q, Mode mode, Cache* cache = nullptr) const;
    Tensor<T> backward(const Cache& cache, const Tensor<T>& d_logit);

    // Folds the statistics of one training forward into the running averages.
    void absorb_statistics(const Cache& cache, double momentum = 0.1);

    std::vector<ParamRef<T>> params(const std::string& prefix);
    std::vector<BufferRef<T>> buffers(const std::string& prefix);

    LayerParams<T> conv1, norm1, conv2, norm2, conv3;
    std::vector<T> running_mean1, running_var1, running_mean2, running_var2;
};

/// Question encoder plus answer-prediction head (single attention, two
/// stacked attention layers joined by a C_m -> q_dim bridge, or FCN).
template <typename T>
class PointerModel {
public:
    struct Cache {
        typename QuestionEncoder<T>::Cache question;
        Tensor<T> f_q;
        std::vector<typename AttentionLayer<T>::Cache> attention;
        Tensor<T> weights;   // normalised first-layer map
        Tensor<T> context;   // weighted average of f_m
        Tensor<T> q2;        // question input of layer 2
        typename FcnHead<T>::Cache fcn;
        Tensor<T> p;
    };

    PointerModel() = default;
    PointerModel(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }

    // p_att [G, G] for fused features f_m [G, G, C_m] and embedded question words.
    Tensor<T> forward(const Tensor<T>& f_m, const std::vector<Tensor<T>>& words, Mode mode, Rng& rng,
                      Cache* cache = nullptr) const;

    // Accumulates gradients of the cell-summed BCE of cache.p against gt_mask.
    void backward(const Tensor<T>& f_m, const Cache& cache, const Tensor<T>& gt_mask);

    // forward + loss + backward; returns the loss. In train mode the FCN
    // running statistics are updated.
    double train_step(const Tensor<T>& f_m, const std::vector<Tensor<T>>& words, const Tensor<T>& gt_mask,
                      Rng& rng, bool update_statistics = true);

    std::vector<ParamRef<T>> params();
    std::vector<BufferRef<T>> buffers();

    std::vector<CheckpointRecord> to_records() const;
    // Throws ConfigError naming the first missing or mis-shaped record.
    void load_records(const std::vector<CheckpointRecord>& records);

    void save(const std::filesystem::path& path) const { write_checkpoint(path, to_records()); }
    void load(const std::filesystem::path& path) { load_records(read_checkpoint(path)); }

    QuestionEncoder<T> question;
    std::vector<AttentionLayer<T>> attention;
    LayerParams<T> bridge;
    FcnHead<T> fcn;

private:
    ModelConfig cfg_;
};

// ---------------------------------------------------------------------------
// Operation-level entry points
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> attention_forward(const AttentionLayer<T>& layer, const Tensor<T>& f_m, const Tensor<T>& f_q) {
    return layer.forward(f_m, f_q);
}

// Answer map of a pointer-mode model (single or stacked) for a given f_q.
template <typename T>
Tensor<T> stacked_forward(const PointerModel<T>& model, const Tensor<T>& f_m, const Tensor<T>& f_q);

template <typename T>
Tensor<T> fcn_forward(const FcnHead<T>& head, const Tensor<T>& f_m, const Tensor<T>& f_q, Mode mode = Mode::Eval) {
    return head.forward(f_m, f_q, mode);
}

inline constexpr double kProbabilityClamp = 1e-7;

// E = -sum_cells [g log p + (1 - g) log(1 - p)], p clamped to [1e-7, 1 - 1e-7].
template <typename T>
double bce_loss(const Tensor<T>& p, const Tensor<T>& g);

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

struct Providers {
    const EmbeddingTable& embeddings;
    const FeatureProvider& features;
};

struct PredictionOutput {
    Tensor<float> p_att;  // [G, G]
    GridCell argmax_cell;
    std::optional<std::string> answer_text;
    double confidence = 0.0;
};

// First maximum in row-major order.
GridCell argmax_cell(const Tensor<float>& p_att);

// Fused features and grid assignment of an example at grid size `grid`.
struct ExampleGrid {
    GridAssignment assignment;
    Tensor<float> fused;
};
ExampleGrid prepare_grid(const QaExample& example, const Providers& providers, std::size_t grid);

// Decodes an answer map against a grid assignment.
PredictionOutput decode_prediction(Tensor<float> p_att, const GridAssignment& assignment, const QaExample& example);

template <typename T>
PredictionOutput predict(const PointerModel<T>& model, const QaExample& example, const Providers& providers);

template <typename T>
std::vector<PredictionOutput> predict_multiscale(const PointerModel<T>& model, const QaExample& example,
                                                 const Providers& providers, const std::vector<std::size_t>& grids);

}  // namespace gridvqa
