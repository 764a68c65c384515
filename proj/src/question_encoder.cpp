#include "gridvqa/question_encoder.hpp"

#include <cctype>

#include "gridvqa/errors.hpp"
#include "gridvqa/log.hpp"

namespace gridvqa {

std::vector<std::string> preprocess_question(const std::vector<std::string>& words, std::size_t max_length) {
    std::vector<std::string> out;
    for (const auto& w : words) {
        std::string clean;
        for (char ch : w) {
            const auto u = static_cast<unsigned char>(ch);
            if (u < 0x80 && (std::ispunct(u) || std::isspace(u))) continue;
            clean += u < 0x80 ? static_cast<char>(std::tolower(u)) : ch;
        }
        if (!clean.empty()) out.push_back(std::move(clean));
    }
    if (out.size() > max_length) {
        log::warn("question of " + std::to_string(out.size()) + " words truncated to " + std::to_string(max_length));
        out.resize(max_length);
    }
    return out;
}

template <typename T>
std::vector<Tensor<T>> embed_question(const EmbeddingTable& table, const std::vector<std::string>& question,
                                      std::size_t max_length) {
    const auto words = preprocess_question(question, max_length);
    if (words.empty()) throw ContractError("question has no words");
    std::vector<Tensor<T>> out;
    out.reserve(words.size());
    for (const auto& w : words) out.push_back(table.embed(w).template cast<T>());
    return out;
}

template <typename T>
QuestionEncoder<T>::QuestionEncoder(const ModelConfig& cfg, Rng& rng) : dropout_rate(cfg.dropout) {
    const std::size_t hid = cfg.lstm_hidden;
    // Glorot over the stacked gate matrix, forget bias left at zero.
    lstm1 = make_dense_params<T>(cfg.embedding_dim + hid, 4 * hid, rng);
    lstm2 = make_dense_params<T>(hid + hid, 4 * hid, rng);
    projection = make_dense_params<T>(hid, cfg.question_dim, rng);
}

template <typename T>
Tensor<T> QuestionEncoder<T>::forward(const std::vector<Tensor<T>>& words, Mode mode, Rng& rng,
                                      Cache* cache) const {
    if (words.empty()) throw ContractError("question encoder needs at least one word");
    const std::size_t hid = lstm1.weight.extent(1) / 4;
    if (cache) *cache = Cache{};
    LstmState<T> s1{Tensor<T>({hid}), Tensor<T>({hid})};
    LstmState<T> s2 = s1;
    for (const auto& x : words) {
        LstmCache<T> c1, c2;
        s1 = lstm_step(x, s1.h, s1.c, lstm1, cache ? &c1 : nullptr);
        auto d1 = dropout(s1.h, dropout_rate, mode, rng);
        s2 = lstm_step(d1.output, s2.h, s2.c, lstm2, cache ? &c2 : nullptr);
        if (cache) {
            cache->layer1.push_back(std::move(c1));
            cache->layer2.push_back(std::move(c2));
            cache->drop1_mask.push_back(std::move(d1.mask));
        }
    }
    auto d2 = dropout(s2.h, dropout_rate, mode, rng);
    Tensor<T> out = dense_apply(d2.output, projection);
    if (cache) {
        cache->drop2_mask = std::move(d2.mask);
        cache->final_dropped = std::move(d2.output);
    }
    return out;
}

template <typename T>
void QuestionEncoder<T>::backward(const Cache& cache, const Tensor<T>& d_out) {
    const std::size_t hid = lstm1.weight.extent(1) / 4;
    Tensor<T> d_final = dense_backward(cache.final_dropped, d_out, projection);
    for (std::size_t k = 0; k < hid; ++k) d_final[k] *= cache.drop2_mask[k];

    const std::size_t steps = cache.layer1.size();
    Tensor<T> dh2 = d_final, dc2({hid});
    Tensor<T> dh1({hid}), dc1({hid});
    // Layer 2 inputs are the dropped-out layer 1 outputs; run both layers
    // backwards in lockstep.
    for (std::size_t t = steps; t-- > 0;) {
        auto g2 = lstm_step_backward(cache.layer2[t], dh2, dc2, lstm2);
        dh2 = std::move(g2.dh_prev);
        dc2 = std::move(g2.dc_prev);
        for (std::size_t k = 0; k < hid; ++k) dh1[k] += g2.dx[k] * cache.drop1_mask[t][k];
        auto g1 = lstm_step_backward(cache.layer1[t], dh1, dc1, lstm1);
        dh1 = std::move(g1.dh_prev);
        dc1 = std::move(g1.dc_prev);
    }
}

template <typename T>
std::vector<ParamRef<T>> QuestionEncoder<T>::params(const std::string& prefix) {
    return {{prefix + "lstm1", &lstm1}, {prefix + "lstm2", &lstm2}, {prefix + "projection", &projection}};
}

template class QuestionEncoder<float>;
template class QuestionEncoder<double>;
template std::vector<Tensor<float>> embed_question<float>(const EmbeddingTable&, const std::vector<std::string>&, std::size_t);
template std::vector<Tensor<double>> embed_question<double>(const EmbeddingTable&, const std::vector<std::string>&, std::size_t);

}  // namespace gridvqa
