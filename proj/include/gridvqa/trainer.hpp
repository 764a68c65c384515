#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gridvqa/metrics.hpp"
#include "gridvqa/optimizer.hpp"
#include "gridvqa/pointer_model.hpp"

namespace gridvqa {

struct TrainConfig {
    std::size_t epochs = 300;
    std::size_t batch_size = 32;
    double learning_rate = 1e-4;
    std::uint64_t seed = 0;
    std::size_t patience = 20;  // epochs without train-ANLS improvement before stopping
    // When set, model.ckpt (final), best.ckpt (best train ANLS) and
    // train_log.jsonl are written here.
    std::optional<std::filesystem::path> output_dir;
};

struct EpochLog {
    std::size_t epoch = 0;  // 1-based
    double mean_loss = 0.0;
    double train_anls = 0.0;
};

struct TrainResult {
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;
    double best_anls = 0.0;
    std::vector<CheckpointRecord> best_records;
};

// One training example with everything the model needs precomputed.
struct PreparedExample {
    const QaExample* example = nullptr;
    GridAssignment assignment;
    Tensor<float> fused;
    Tensor<float> gt_mask;
    std::vector<Tensor<float>> words;
};

// Throws ContractError if an example has no answer among its OCR tokens.
std::vector<PreparedExample> prepare_examples(const std::vector<QaExample>& examples, const Providers& providers,
                                              std::size_t max_question_length);

// Eval-mode answers of `model` for every prepared example.
std::vector<PredictionRecord> predict_prepared(const PointerModel<float>& model,
                                               const std::vector<PreparedExample>& prepared);

std::string epoch_log_line(const EpochLog& e);

/// Mini-batch training on pre-filtered examples: per example features ->
/// fuse -> question encoder -> attention stack -> BCE -> backward, gradients
/// averaged over the batch, one Adam step per batch. Throws NumericError on a
/// non-finite loss.
TrainResult train(PointerModel<float>& model, const std::vector<QaExample>& examples, const Providers& providers,
                  const TrainConfig& config, const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace gridvqa
