#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gridvqa/dataset.hpp"
#include "gridvqa/embedding.hpp"
#include "gridvqa/features.hpp"

namespace gridvqa {

// Colour palette of the synthetic task; colour k lights up visual channel k.
inline constexpr std::array<const char*, 8> kSynthPalette = {"red",    "green",  "blue",  "yellow",
                                                             "purple", "orange", "white", "black"};

struct SynthConfig {
    std::uint64_t seed = 42;
    std::size_t count = 200;
    std::size_t grid = 19;
    std::size_t visual_channels = 16;  // >= palette size
    std::size_t embedding_dim = 50;
    std::size_t vocabulary = 2000;     // OCR word pool
    std::size_t min_tokens = 3;
    std::size_t max_tokens = 8;
    double noise = 0.1;
    double signal = 2.0;           // colour channel offset on the painted cells
    double embedding_scale = 0.1;  // per-coordinate std of word vectors
    bool color_distractors = false;  // also paint the other words, each in its own colour
};

struct SynthData {
    std::vector<QaExample> examples;
    std::vector<FeatureRecord> features;
    EmbeddingTable embeddings;
};

/// Each image holds K in [min_tokens, max_tokens] non-overlapping,
/// cell-aligned word boxes. The answer word's cells are painted with a palette
/// colour in the visual features and the question names that colour, so the
/// answer is always an OCR token and is recoverable from the fused grid.
/// With color_distractors every word gets its own colour and the question has
/// to be read to pick the right one; that variant is much harder to fit.
SynthData generate_synthetic(const SynthConfig& config);

struct SynthPaths {
    std::filesystem::path dataset, features, embeddings, config;
};

// Writes dataset.json, features.gfea, embeddings.txt and config.json into `dir`.
SynthPaths write_synthetic(const SynthData& data, const SynthConfig& config, const std::filesystem::path& dir);

}  // namespace gridvqa
