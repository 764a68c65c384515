#pragma once

#include <string>
#include <vector>

#include "gridvqa/layers.hpp"

namespace gridvqa {

// Named view of one trainable layer owned by a model.
template <typename T>
struct ParamRef {
    std::string name;
    LayerParams<T>* params;
};

// Named non-trainable state (running statistics) owned by a model.
template <typename T>
struct BufferRef {
    std::string name;
    std::vector<T>* values;
};

template <typename T>
void zero_grads(const std::vector<ParamRef<T>>& params) {
    for (const auto& p : params) p.params->zero_grad();
}

template <typename T>
std::size_t count_parameters(const std::vector<ParamRef<T>>& params) {
    std::size_t n = 0;
    for (const auto& p : params) n += p.params->weight.size() + p.params->bias.size();
    return n;
}

}  // namespace gridvqa
