#include "gridvqa/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "gridvqa/errors.hpp"
#include "gridvqa/rng.hpp"
#include "gridvqa/run_config.hpp"
#include "gridvqa/text.hpp"

namespace gridvqa {

namespace {

constexpr std::array<const char*, 4> kTemplates = {
    "what word is written in {}",
    "which word has the color {}",
    "what is the {} text",
    "read the {} word in the image",
};

std::vector<std::string> make_vocabulary(std::size_t n, Rng& rng) {
    static constexpr std::array<const char*, 20> onsets = {"b", "c", "d", "f", "g", "h", "k", "l", "m", "n",
                                                          "p", "r", "s", "t", "v", "z", "st", "tr", "br", "ch"};
    static constexpr std::array<const char*, 6> vowels = {"a", "e", "i", "o", "u", "y"};
    std::set<std::string> reserved;
    for (const char* c : kSynthPalette) reserved.insert(c);
    std::set<std::string> seen;
    std::vector<std::string> out;
    while (out.size() < n) {
        std::string w;
        const auto syllables = rng.range(2, 3);
        for (std::int64_t s = 0; s < syllables; ++s) {
            w += onsets[rng.below(onsets.size())];
            w += vowels[rng.below(vowels.size())];
        }
        if (rng.bernoulli(0.3)) w += onsets[rng.below(12)];
        if (reserved.count(w) || !seen.insert(w).second) continue;
        out.push_back(std::move(w));
    }
    return out;
}

std::string fill_template(const char* tpl, const std::string& color) {
    std::string s(tpl);
    s.replace(s.find("{}"), 2, color);
    return s;
}

std::vector<float> random_vector(std::size_t dim, double scale, Rng& rng) {
    std::vector<float> v(dim);
    for (auto& x : v) x = static_cast<float>(rng.normal() * scale);
    return v;
}

}  // namespace

SynthData generate_synthetic(const SynthConfig& cfg) {
    if (cfg.count == 0) throw ConfigError("synthetic count must be at least 1");
    if (cfg.visual_channels < kSynthPalette.size()) {
        throw ConfigError("synthetic features need at least " + std::to_string(kSynthPalette.size()) + " channels");
    }
    if (cfg.min_tokens == 0 || cfg.max_tokens < cfg.min_tokens || cfg.max_tokens > kSynthPalette.size()) {
        throw ConfigError("synthetic token count range must lie within [1, palette size]");
    }
    if (cfg.grid < 4) throw ConfigError("synthetic grid must be at least 4");

    Rng rng(splitmix64(cfg.seed));
    SynthData data{{}, {}, EmbeddingTable(cfg.embedding_dim)};
    const auto vocab = make_vocabulary(cfg.vocabulary, rng);

    std::set<std::string> question_words;
    for (const char* tpl : kTemplates) {
        for (const char* color : kSynthPalette) {
            for (const auto& w : split_whitespace(fill_template(tpl, color))) question_words.insert(w);
        }
    }
    for (const auto& w : question_words) data.embeddings.insert(w, random_vector(cfg.embedding_dim, cfg.embedding_scale, rng));
    for (const auto& w : vocab) {
        if (!data.embeddings.contains(w)) data.embeddings.insert(w, random_vector(cfg.embedding_dim, cfg.embedding_scale, rng));
    }

    const std::size_t g = cfg.grid;
    const double gd = static_cast<double>(g);
    for (std::size_t n = 0; n < cfg.count; ++n) {
        QaExample ex;
        ex.question_id = std::to_string(n);
        ex.image_id = "synth_" + std::to_string(n);

        std::vector<std::size_t> palette(kSynthPalette.size());
        std::iota(palette.begin(), palette.end(), std::size_t{0});
        rng.shuffle(palette);
        const auto k = static_cast<std::size_t>(rng.range(static_cast<std::int64_t>(cfg.min_tokens),
                                                          static_cast<std::int64_t>(cfg.max_tokens)));

        std::vector<char> occupied(g * g, 0);
        Tensor<float> feats({g, g, cfg.visual_channels});
        for (auto& v : feats.values()) v = static_cast<float>(rng.normal() * cfg.noise);

        std::set<std::string> used_words;
        std::vector<std::size_t> colors;
        for (std::size_t t = 0; t < k; ++t) {
            // Rejection-sample a free cell-aligned rectangle; give up on this
            // token if the grid is too crowded.
            for (int attempt = 0; attempt < 200; ++attempt) {
                const auto w = static_cast<std::size_t>(rng.range(1, 4));
                const auto h = static_cast<std::size_t>(rng.range(1, 2));
                const auto c0 = static_cast<std::size_t>(rng.below(g - w + 1));
                const auto r0 = static_cast<std::size_t>(rng.below(g - h + 1));
                bool free = true;
                for (std::size_t r = r0; r < r0 + h && free; ++r)
                    for (std::size_t c = c0; c < c0 + w && free; ++c) free = !occupied[r * g + c];
                if (!free) continue;
                std::string word;
                do {
                    word = vocab[rng.below(vocab.size())];
                } while (!used_words.insert(word).second);
                for (std::size_t r = r0; r < r0 + h; ++r)
                    for (std::size_t c = c0; c < c0 + w; ++c) occupied[r * g + c] = 1;
                ex.ocr.push_back({word, Box{static_cast<double>(c0) / gd, static_cast<double>(r0) / gd,
                                            static_cast<double>(c0 + w) / gd, static_cast<double>(r0 + h) / gd}});
                colors.push_back(palette[t]);
                break;
            }
        }
        if (ex.ocr.empty()) throw std::logic_error("synthetic grid too small to place any token");

        const std::size_t target = rng.below(ex.ocr.size());
        for (std::size_t t = 0; t < ex.ocr.size(); ++t) {
            if (t != target && !cfg.color_distractors) continue;
            const Box& b = ex.ocr[t].box;
            const auto c0 = static_cast<std::size_t>(std::lround(b.x0 * gd)), c1 = static_cast<std::size_t>(std::lround(b.x1 * gd));
            const auto r0 = static_cast<std::size_t>(std::lround(b.y0 * gd)), r1 = static_cast<std::size_t>(std::lround(b.y1 * gd));
            for (std::size_t r = r0; r < r1; ++r)
                for (std::size_t c = c0; c < c1; ++c) feats.at(r, c, colors[t]) += static_cast<float>(cfg.signal);
        }
        const char* tpl = kTemplates[rng.below(kTemplates.size())];
        ex.question = split_whitespace(fill_template(tpl, kSynthPalette[colors[target]]));
        ex.answers = {ex.ocr[target].text};
        data.features.push_back({ex.image_id, std::move(feats)});
        data.examples.push_back(std::move(ex));
    }
    return data;
}

SynthPaths write_synthetic(const SynthData& data, const SynthConfig& cfg, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    SynthPaths paths{dir / "dataset.json", dir / "features.gfea", dir / "embeddings.txt", dir / "config.json"};
    save_dataset(paths.dataset, data.examples);
    write_feature_file(paths.features, data.features);
    data.embeddings.save(paths.embeddings);

    RunConfig rc;
    rc.dataset = "dataset.json";
    rc.features = "features.gfea";
    rc.embeddings = "embeddings.txt";
    rc.checkpoint = "run/model.ckpt";
    rc.output_dir = "run";
    rc.grid = cfg.grid;
    rc.model.visual_channels = cfg.visual_channels;
    rc.model.embedding_dim = cfg.embedding_dim;
    // Paths stay relative to the corpus directory so it can be moved.
    std::ofstream os(paths.config, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open config for writing: " + paths.config.string());
    os << run_config_to_json(rc) << '\n';
    return paths;
}

}  // namespace gridvqa
