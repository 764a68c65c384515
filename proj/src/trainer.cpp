#include "gridvqa/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "gridvqa/errors.hpp"

namespace gridvqa {

std::vector<PreparedExample> prepare_examples(const std::vector<QaExample>& examples, const Providers& providers,
                                              std::size_t max_question_length) {
    const std::size_t grid = providers.features.grid();
    std::vector<PreparedExample> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) {
        auto eg = prepare_grid(ex, providers, grid);
        PreparedExample pe;
        pe.example = &ex;
        pe.gt_mask = build_gt_mask(ex.ocr, ground_truth_match(ex), grid);
        pe.words = embed_question<float>(providers.embeddings, ex.question, max_question_length);
        pe.assignment = std::move(eg.assignment);
        pe.fused = std::move(eg.fused);
        out.push_back(std::move(pe));
    }
    return out;
}

std::vector<PredictionRecord> predict_prepared(const PointerModel<float>& model,
                                               const std::vector<PreparedExample>& prepared) {
    Rng unused(0);
    std::vector<PredictionRecord> out;
    out.reserve(prepared.size());
    for (const auto& pe : prepared) {
        auto p = model.forward(pe.fused, pe.words, Mode::Eval, unused);
        auto pred = decode_prediction(std::move(p), pe.assignment, *pe.example);
        out.push_back({pe.example->question_id, pred.answer_text.value_or(""), pred.confidence});
    }
    return out;
}

std::string epoch_log_line(const EpochLog& e) {
    return nlohmann::json{{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"train_anls", e.train_anls}}.dump();
}

TrainResult train(PointerModel<float>& model, const std::vector<QaExample>& examples, const Providers& providers,
                  const TrainConfig& config, const std::function<void(const EpochLog&)>& on_epoch) {
    if (examples.empty()) throw ContractError("training set is empty");
    if (config.batch_size == 0) throw ConfigError("batch size must be positive");
    const auto prepared = prepare_examples(examples, providers, model.config().max_question_length);

    AdamConfig adam_cfg;
    adam_cfg.learning_rate = config.learning_rate;
    Adam<float> optimizer(adam_cfg);
    Rng rng(splitmix64(config.seed));
    const auto params = model.params();
    zero_grads(params);

    std::optional<std::ofstream> log_file;
    if (config.output_dir) {
        std::filesystem::create_directories(*config.output_dir);
        log_file.emplace(*config.output_dir / "train_log.jsonl", std::ios::trunc);
    }

    TrainResult result;
    std::size_t stagnant = 0;
    std::vector<std::size_t> order(prepared.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            for (std::size_t k = start; k < end; ++k) {
                const auto& pe = prepared[order[k]];
                const double loss = model.train_step(pe.fused, pe.words, pe.gt_mask, rng);
                if (!std::isfinite(loss)) {
                    throw NumericError("non-finite loss on question " + pe.example->question_id + " (image " +
                                       pe.example->image_id + ") in epoch " + std::to_string(epoch));
                }
                loss_sum += loss;
            }
            const float scale = 1.0f / static_cast<float>(end - start);
            for (const auto& p : params) {
                for (auto& g : p.params->grad_weight.values()) g *= scale;
                for (auto& g : p.params->grad_bias.values()) g *= scale;
            }
            optimizer.step(params);
        }

        std::map<std::string, std::string> answers;
        for (auto& r : predict_prepared(model, prepared)) answers[r.question_id] = std::move(r.answer);
        EpochLog entry{epoch, loss_sum / static_cast<double>(prepared.size()), score_anls(answers, examples).anls};
        result.log.push_back(entry);
        if (log_file) *log_file << epoch_log_line(entry) << '\n' << std::flush;
        if (on_epoch) on_epoch(entry);

        if (entry.train_anls > result.best_anls || result.best_epoch == 0) {
            result.best_anls = entry.train_anls;
            result.best_epoch = epoch;
            result.best_records = model.to_records();
            if (config.output_dir) write_checkpoint(*config.output_dir / "best.ckpt", result.best_records);
            stagnant = 0;
        } else if (++stagnant >= config.patience) {
            break;
        }
    }
    if (config.output_dir) model.save(*config.output_dir / "model.ckpt");
    return result;
}

}  // namespace gridvqa
