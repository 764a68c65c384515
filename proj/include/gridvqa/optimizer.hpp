#pragma once

#include <cstdint>
#include <vector>

#include "gridvqa/params.hpp"

namespace gridvqa {

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adaptive-moment optimizer. Moments are created lazily on the first step
/// and mirror the registered parameter shapes.
template <typename T>
class Adam {
public:
    explicit Adam(AdamConfig config = {}) : config_(config) {}

    const AdamConfig& config() const { return config_; }
    std::uint64_t step_count() const { return step_; }

    // Applies one update from the accumulated gradients, then zeroes them.
    void step(const std::vector<ParamRef<T>>& params);

private:
    struct Moments {
        std::vector<T> m_w, v_w, m_b, v_b;
    };

    AdamConfig config_;
    std::uint64_t step_ = 0;
    std::vector<Moments> moments_;
};

}  // namespace gridvqa
