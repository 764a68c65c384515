#pragma once

// Independent reference implementations used by the unit and acceptance tests.
// They are deliberately naive (scalar loops, explicit pixels) and share no code
// with the library beyond the plain data types.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "gridvqa/dataset.hpp"
#include "gridvqa/model_config.hpp"
#include "gridvqa/rng.hpp"

namespace oracle {

// Quadratic dynamic program over code points.
inline std::size_t edit_distance(const std::u32string& a, const std::u32string& b) {
    std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
    for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
    for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, sub});
        }
    }
    return d[a.size()][b.size()];
}

// A box on a P x P pixel lattice, P = k * G, covering pixels [px0, px1) x [py0, py1).
struct PixelBox {
    std::size_t px0, py0, px1, py1;
    std::size_t pixels() const { return (px1 - px0) * (py1 - py0); }
};

inline gridvqa::Box to_box(const PixelBox& b, std::size_t lattice) {
    const double p = static_cast<double>(lattice);
    return {static_cast<double>(b.px0) / p, static_cast<double>(b.py0) / p, static_cast<double>(b.px1) / p,
            static_cast<double>(b.py1) / p};
}

inline PixelBox random_pixel_box(gridvqa::Rng& rng, std::size_t lattice) {
    PixelBox b{};
    b.px0 = static_cast<std::size_t>(rng.below(lattice));
    b.px1 = b.px0 + 1 + static_cast<std::size_t>(rng.below(lattice - b.px0));
    b.py0 = static_cast<std::size_t>(rng.below(lattice));
    b.py1 = b.py0 + 1 + static_cast<std::size_t>(rng.below(lattice - b.py0));
    return b;
}

// Cells (row-major flags) that contain at least one covered pixel.
inline std::vector<bool> rasterize(const PixelBox& b, std::size_t grid, std::size_t k) {
    std::vector<bool> hit(grid * grid, false);
    for (std::size_t y = b.py0; y < b.py1; ++y)
        for (std::size_t x = b.px0; x < b.px1; ++x) hit[(y / k) * grid + (x / k)] = true;
    return hit;
}

// Paints boxes in (pixel area descending, index ascending) order and reports
// the last token painted into each cell.
inline std::vector<std::optional<std::size_t>> paint_cells(const std::vector<PixelBox>& boxes, std::size_t grid,
                                                           std::size_t k) {
    std::vector<std::size_t> order(boxes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (boxes[a].pixels() != boxes[b].pixels()) return boxes[a].pixels() > boxes[b].pixels();
        return a < b;
    });
    std::vector<std::optional<std::size_t>> owner(grid * grid);
    for (std::size_t idx : order) {
        const auto hit = rasterize(boxes[idx], grid, k);
        for (std::size_t c = 0; c < hit.size(); ++c)
            if (hit[c]) owner[c] = idx;
    }
    return owner;
}

// Widths used by the gradient checks.
inline gridvqa::ModelConfig tiny_config(gridvqa::StackMode stack = gridvqa::StackMode::Stacked) {
    gridvqa::ModelConfig c;
    c.visual_channels = 8;
    c.embedding_dim = 6;
    c.lstm_hidden = 8;
    c.question_dim = 12;
    c.attention_hidden = 8;
    c.attention_dim = 8;
    c.fcn_channels1 = 8;
    c.fcn_channels2 = 8;
    c.stack = stack;
    return c;
}

}  // namespace oracle
