#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "gridvqa/model_config.hpp"

namespace gridvqa {

/// Everything a command needs, in one JSON document (docs/formats.md).
/// Relative paths in a config file are resolved against the file's directory.
struct RunConfig {
    std::filesystem::path dataset;
    std::filesystem::path embeddings;
    std::filesystem::path features;  // empty: synthetic features from `feature_seed`
    std::filesystem::path checkpoint;
    std::filesystem::path output_dir = "run";

    std::size_t grid = 19;
    std::uint64_t feature_seed = 0;
    ModelConfig model;

    std::uint64_t seed = 0;
    double learning_rate = 1e-4;
    std::size_t batch_size = 32;
    std::size_t epochs = 300;
    std::size_t patience = 20;

    std::optional<double> anls_threshold;
    double ensemble_tau = 0.37;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

std::string run_config_to_json(const RunConfig& cfg);
// Fields absent from the document keep their defaults.
RunConfig run_config_from_json(const std::string& text, const std::filesystem::path& base_dir = {});

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const std::filesystem::path& path, const RunConfig& cfg);

}  // namespace gridvqa
