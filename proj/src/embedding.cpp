#include "gridvqa/embedding.hpp"

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include "gridvqa/errors.hpp"
#include "gridvqa/rng.hpp"
#include "gridvqa/text.hpp"

namespace gridvqa {

EmbeddingTable::EmbeddingTable(std::size_t dimension, OovHashing oov) : dim_(dimension), oov_(oov) {
    if (dim_ == 0) throw ConfigError("embedding dimension must be positive");
    if (oov_.min_n < 1 || oov_.max_n < oov_.min_n || oov_.buckets == 0) {
        throw ConfigError("invalid OOV hashing parameters");
    }
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path, OovHashing oov) {
    std::ifstream is(path);
    if (!is) throw LookupError("cannot open embedding file: " + path.string());
    std::string line;
    std::size_t line_no = 0;
    std::optional<EmbeddingTable> table;
    while (std::getline(is, line)) {
        ++line_no;
        auto fields = split_whitespace(line);
        if (fields.empty()) continue;
        if (line_no == 1 && fields.size() == 2 && fields[0].find_first_not_of("0123456789") == std::string::npos &&
            fields[1].find_first_not_of("0123456789") == std::string::npos) {
            continue;  // "<count> <dim>" header
        }
        if (fields.size() < 2) throw ParseError(path.string() + ":" + std::to_string(line_no) + ": no vector values");
        const std::size_t dim = fields.size() - 1;
        if (!table) table.emplace(dim, oov);
        if (dim != table->dimension()) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(table->dimension()) + " values, got " + std::to_string(dim));
        }
        std::vector<float> vec(dim);
        for (std::size_t k = 0; k < dim; ++k) {
            try {
                vec[k] = std::stof(fields[k + 1]);
            } catch (const std::exception&) {
                throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad value \"" + fields[k + 1] + "\"");
            }
        }
        table->insert(std::move(fields[0]), std::move(vec));
    }
    if (!table) throw ParseError(path.string() + ": no embedding vectors");
    return std::move(*table);
}

void EmbeddingTable::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open embedding file for writing: " + path.string());
    os.precision(9);
    for (const auto& w : order_) {
        os << w;
        for (float v : vectors_.at(w)) os << ' ' << v;
        os << '\n';
    }
}

void EmbeddingTable::insert(std::string word, std::vector<float> vec) {
    if (vec.size() != dim_) {
        throw DimensionError("embedding for \"" + word + "\" has " + std::to_string(vec.size()) +
                             " values, table dimension is " + std::to_string(dim_));
    }
    auto [it, inserted] = vectors_.insert_or_assign(word, std::move(vec));
    if (inserted) order_.push_back(std::move(word));
}

bool EmbeddingTable::contains(std::string_view word) const {
    return vectors_.find(std::string(word)) != vectors_.end();
}

std::vector<std::uint32_t> EmbeddingTable::ngram_buckets(std::string_view word) const {
    const std::string marked = "<" + std::string(word) + ">";
    // Character starts, so n-grams never split a UTF-8 sequence.
    std::vector<std::size_t> starts;
    for (std::size_t i = 0; i < marked.size(); ++i) {
        if ((static_cast<unsigned char>(marked[i]) & 0xC0) != 0x80) starts.push_back(i);
    }
    starts.push_back(marked.size());
    const std::size_t chars = starts.size() - 1;
    std::vector<std::uint32_t> out;
    for (std::size_t b = 0; b < chars; ++b) {
        for (int n = oov_.min_n; n <= oov_.max_n; ++n) {
            const std::size_t e = b + static_cast<std::size_t>(n);
            if (e > chars) break;
            const std::string_view gram(marked.data() + starts[b], starts[e] - starts[b]);
            out.push_back(static_cast<std::uint32_t>(fnv1a(gram) % oov_.buckets));
        }
    }
    return out;
}

std::vector<float> EmbeddingTable::bucket_vector(std::uint32_t bucket) const {
    std::vector<float> v(dim_);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim_));
    std::uint64_t state = splitmix64(oov_.seed ^ splitmix64(bucket));
    for (auto& x : v) {
        state = splitmix64(state);
        const double u = static_cast<double>(state >> 11) * 0x1.0p-53;
        x = static_cast<float>((2.0 * u - 1.0) * scale);
    }
    return v;
}

Tensor<float> EmbeddingTable::embed(std::string_view word) const {
    Tensor<float> out({dim_});
    if (word.empty()) return out;
    if (auto it = vectors_.find(std::string(word)); it != vectors_.end()) {
        std::copy(it->second.begin(), it->second.end(), out.data());
        return out;
    }
    const auto buckets = ngram_buckets(word);
    if (buckets.empty()) return out;
    std::vector<double> acc(dim_, 0.0);
    for (auto b : buckets) {
        const auto v = bucket_vector(b);
        for (std::size_t k = 0; k < dim_; ++k) acc[k] += v[k];
    }
    for (std::size_t k = 0; k < dim_; ++k) out[k] = static_cast<float>(acc[k] / static_cast<double>(buckets.size()));
    return out;
}

}  // namespace gridvqa
