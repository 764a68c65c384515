#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gridvqa/tensor.hpp"

namespace gridvqa {

// Character n-gram hashing for out-of-vocabulary words. Each n-gram of
// "<word>" is hashed into one of `buckets` pseudo-random vectors; the OOV
// embedding is their mean.
struct OovHashing {
    int min_n = 3;
    int max_n = 6;
    std::uint32_t buckets = 1u << 15;
    std::uint64_t seed = 0;
};

class EmbeddingTable {
public:
    explicit EmbeddingTable(std::size_t dimension = 300, OovHashing oov = {});

    // Text format: one line per word, the word followed by `dimension` floats.
    // A leading fastText-style "<count> <dim>" header line is accepted.
    static EmbeddingTable load(const std::filesystem::path& path, OovHashing oov = {});
    void save(const std::filesystem::path& path) const;

    std::size_t dimension() const { return dim_; }
    std::size_t vocabulary_size() const { return vectors_.size(); }
    const OovHashing& oov() const { return oov_; }

    void insert(std::string word, std::vector<float> vec);
    bool contains(std::string_view word) const;

    // Total lookup: stored vector, else hashed n-gram mean, else zeros for the
    // empty string.
    Tensor<float> embed(std::string_view word) const;

    // Bucket indices of the hashed n-grams of `word`, in extraction order.
    std::vector<std::uint32_t> ngram_buckets(std::string_view word) const;
    // Deterministic vector of one hash bucket.
    std::vector<float> bucket_vector(std::uint32_t bucket) const;

private:
    std::size_t dim_;
    OovHashing oov_;
    std::unordered_map<std::string, std::vector<float>> vectors_;
    std::vector<std::string> order_;  // insertion order, for stable saving
};

inline Tensor<float> embed_word(const EmbeddingTable& table, std::string_view word) {
    return table.embed(word);
}

}  // namespace gridvqa
