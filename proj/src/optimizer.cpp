#include "gridvqa/optimizer.hpp"

#include <cmath>

namespace gridvqa {

namespace {

template <typename T>
void adam_update(Tensor<T>& value, Tensor<T>& grad, std::vector<T>& m, std::vector<T>& v,
                 const AdamConfig& cfg, double bias1, double bias2) {
    if (m.size() != value.size()) {
        m.assign(value.size(), T(0));
        v.assign(value.size(), T(0));
    }
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    const T lr = static_cast<T>(cfg.learning_rate);
    const T eps = static_cast<T>(cfg.epsilon);
    const T c1 = static_cast<T>(bias1), c2 = static_cast<T>(bias2);
    for (std::size_t i = 0; i < value.size(); ++i) {
        const T g = grad[i];
        m[i] = b1 * m[i] + (T(1) - b1) * g;
        v[i] = b2 * v[i] + (T(1) - b2) * g * g;
        const T m_hat = m[i] / c1;
        const T v_hat = v[i] / c2;
        value[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        grad[i] = T(0);
    }
}

}  // namespace

template <typename T>
void Adam<T>::step(const std::vector<ParamRef<T>>& params) {
    if (moments_.size() != params.size()) moments_.resize(params.size());
    ++step_;
    const double t = static_cast<double>(step_);
    const double bias1 = 1.0 - std::pow(config_.beta1, t);
    const double bias2 = 1.0 - std::pow(config_.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = *params[k].params;
        auto& mom = moments_[k];
        adam_update(p.weight, p.grad_weight, mom.m_w, mom.v_w, config_, bias1, bias2);
        adam_update(p.bias, p.grad_bias, mom.m_b, mom.v_b, config_, bias1, bias2);
    }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace gridvqa
