#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gridvqa/dataset.hpp"
#include "gridvqa/embedding.hpp"
#include "gridvqa/tensor.hpp"

namespace gridvqa {

struct GridCell {
    std::size_t row = 0;
    std::size_t col = 0;
    friend auto operator<=>(const GridCell&, const GridCell&) = default;
};

/// Scene text rasterised onto a G x G grid.
struct GridAssignment {
    std::size_t grid = 0;
    std::vector<std::optional<std::size_t>> cell_token;  // row-major, G * G
    Tensor<float> text_grid;                             // [G, G, emb_dim]
    Tensor<float> gt_mask;                               // [G, G]; empty until build_gt_mask

    const std::optional<std::size_t>& token_at(GridCell c) const { return cell_token[c.row * grid + c.col]; }
};

// Cells whose square [col/G, (col+1)/G) x [row/G, (row+1)/G) intersects `box`
// with strictly positive area, in row-major order.
std::vector<GridCell> cells_for_box(const Box& box, std::size_t grid);

// Write order used by build_text_grid: descending box area, ties by index.
std::vector<std::size_t> token_write_order(const std::vector<OcrToken>& tokens);

// Writes tokens from larger to smaller boxes so small words overwrite large
// ones in contested cells. Unclaimed cells stay zero.
GridAssignment build_text_grid(const std::vector<OcrToken>& tokens, const EmbeddingTable& table,
                               std::size_t grid);

// Every run of consecutive OCR tokens whose folded, space-joined text equals a
// folded ground-truth answer. Each match lists the token indices of one run.
std::vector<std::vector<std::size_t>> ground_truth_match(const QaExample& example);

// 1 on every cell covered by the box of any matched token, else 0. Defined by
// the boxes, not by which token survived in cell_token.
Tensor<float> build_gt_mask(const std::vector<OcrToken>& tokens,
                            const std::vector<std::vector<std::size_t>>& matches, std::size_t grid);

// Channel-wise concatenation, visual channels first.
Tensor<float> fuse(const Tensor<float>& visual, const Tensor<float>& text_grid);

}  // namespace gridvqa
