#include "gridvqa/grid_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gridvqa/errors.hpp"
#include "gridvqa/text.hpp"

namespace gridvqa {

namespace {

// Index range [lo, hi) of unit-grid intervals [k/G, (k+1)/G) overlapping the
// open interval (a, b) with positive length.
std::pair<std::size_t, std::size_t> overlapping_range(double a, double b, std::size_t grid) {
    const double g = static_cast<double>(grid);
    auto lo = static_cast<std::ptrdiff_t>(std::floor(a * g)) - 1;
    auto hi = static_cast<std::ptrdiff_t>(std::ceil(b * g)) + 1;
    lo = std::max<std::ptrdiff_t>(lo, 0);
    hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(grid));
    // Exact boundary tests: k/G and (k+1)/G are computed by a single division,
    // so a coordinate given as p/q equal to k/G compares equal.
    auto overlaps = [&](std::ptrdiff_t k) {
        const double start = static_cast<double>(k) / g;
        const double end = static_cast<double>(k + 1) / g;
        return a < end && b > start;
    };
    while (lo < hi && !overlaps(lo)) ++lo;
    while (hi > lo && !overlaps(hi - 1)) --hi;
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace

std::vector<GridCell> cells_for_box(const Box& box, std::size_t grid) {
    if (grid == 0) throw ConfigError("grid size must be positive");
    std::vector<GridCell> cells;
    if (!(box.x0 < box.x1 && box.y0 < box.y1)) return cells;
    const auto [r0, r1] = overlapping_range(box.y0, box.y1, grid);
    const auto [c0, c1] = overlapping_range(box.x0, box.x1, grid);
    cells.reserve((r1 - r0) * (c1 - c0));
    for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) cells.push_back({r, c});
    return cells;
}

std::vector<std::size_t> token_write_order(const std::vector<OcrToken>& tokens) {
    // Areas are compared at 1e-9 resolution so that boxes of equal area whose
    // products round differently still tie and fall back to input order.
    std::vector<long long> key(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) key[i] = std::llround(tokens[i].box.area() * 1e9);
    std::vector<std::size_t> order(tokens.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
    return order;
}

GridAssignment build_text_grid(const std::vector<OcrToken>& tokens, const EmbeddingTable& table,
                               std::size_t grid) {
    GridAssignment ga;
    ga.grid = grid;
    ga.cell_token.assign(grid * grid, std::nullopt);
    const std::size_t dim = table.dimension();
    ga.text_grid = Tensor<float>({grid, grid, dim});
    for (std::size_t idx : token_write_order(tokens)) {
        const Tensor<float> vec = table.embed(tokens[idx].text);
        for (const auto& cell : cells_for_box(tokens[idx].box, grid)) {
            ga.cell_token[cell.row * grid + cell.col] = idx;
            std::copy(vec.data(), vec.data() + dim, &ga.text_grid.at(cell.row, cell.col, 0));
        }
    }
    return ga;
}

std::vector<std::vector<std::size_t>> ground_truth_match(const QaExample& example) {
    std::vector<std::string> folded;
    folded.reserve(example.ocr.size());
    for (const auto& t : example.ocr) folded.push_back(fold(t.text));

    std::vector<std::vector<std::size_t>> matches;
    for (const auto& raw_answer : example.answers) {
        const std::string answer = fold(raw_answer);
        if (answer.empty()) continue;
        for (std::size_t start = 0; start < folded.size(); ++start) {
            std::string joined;
            for (std::size_t end = start; end < folded.size(); ++end) {
                if (end > start) joined += ' ';
                joined += folded[end];
                if (joined.size() > answer.size()) break;
                if (joined == answer) {
                    std::vector<std::size_t> run(end - start + 1);
                    std::iota(run.begin(), run.end(), start);
                    if (std::find(matches.begin(), matches.end(), run) == matches.end()) {
                        matches.push_back(std::move(run));
                    }
                    break;
                }
            }
        }
    }
    return matches;
}

Tensor<float> build_gt_mask(const std::vector<OcrToken>& tokens,
                            const std::vector<std::vector<std::size_t>>& matches, std::size_t grid) {
    if (matches.empty()) {
        throw ContractError("ground-truth mask requested for an example with no answer among OCR tokens");
    }
    Tensor<float> mask({grid, grid});
    for (const auto& run : matches) {
        for (std::size_t idx : run) {
            if (idx >= tokens.size()) throw ContractError("matched token index out of range");
            for (const auto& cell : cells_for_box(tokens[idx].box, grid)) mask.at(cell.row, cell.col) = 1.0f;
        }
    }
    return mask;
}

Tensor<float> fuse(const Tensor<float>& visual, const Tensor<float>& text_grid) {
    if (visual.rank() != 3 || text_grid.rank() != 3 || visual.extent(0) != text_grid.extent(0) ||
        visual.extent(1) != text_grid.extent(1)) {
        throw DimensionError("fuse: spatial mismatch " + shape_str(visual.shape()) + " vs " +
                             shape_str(text_grid.shape()));
    }
    const std::size_t h = visual.extent(0), w = visual.extent(1);
    const std::size_t cv = visual.extent(2), ct = text_grid.extent(2);
    Tensor<float> out({h, w, cv + ct});
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            std::copy_n(&visual.at(r, c, 0), cv, &out.at(r, c, 0));
            std::copy_n(&text_grid.at(r, c, 0), ct, &out.at(r, c, cv));
        }
    }
    return out;
}

}  // namespace gridvqa
