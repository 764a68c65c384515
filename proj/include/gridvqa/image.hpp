#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "gridvqa/grid_encoder.hpp"
#include "gridvqa/tensor.hpp"

namespace gridvqa {

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;  // row-major

    std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
};

inline constexpr std::size_t kVizScale = 16;

// p_att scaled to 0..255 (round(255 p)), nearest-neighbour upsampled by
// `scale`; the outlined cell, if any, gets a one-pixel 255 border.
GrayImage render_attention(const Tensor<float>& p_att, std::size_t scale = kVizScale,
                           std::optional<GridCell> outline = std::nullopt);

// Binary PGM (P5) or, with ascii = true, plain PGM (P2).
void write_pgm(const std::filesystem::path& path, const GrayImage& img, bool ascii = false);
GrayImage read_pgm(const std::filesystem::path& path);

}  // namespace gridvqa
