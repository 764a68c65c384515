#pragma once

#include <string>
#include <vector>

#include "gridvqa/rng.hpp"
#include "gridvqa/tensor.hpp"

namespace gridvqa {

enum class Mode { Train, Eval };

enum class Activation { Tanh, Sigmoid, Relu };

/// Trainable weight/bias pair plus gradient accumulators of identical shape.
template <typename T>
struct LayerParams {
    Tensor<T> weight;
    Tensor<T> bias;
    Tensor<T> grad_weight;
    Tensor<T> grad_bias;

    LayerParams() = default;
    LayerParams(Shape weight_shape, Shape bias_shape)
        : weight(weight_shape), bias(bias_shape), grad_weight(weight_shape), grad_bias(bias_shape) {}

    void zero_grad() {
        grad_weight.fill(T(0));
        grad_bias.fill(T(0));
    }

    template <typename U>
    LayerParams<U> cast() const {
        LayerParams<U> out;
        out.weight = weight.template cast<U>();
        out.bias = bias.template cast<U>();
        out.grad_weight = grad_weight.template cast<U>();
        out.grad_bias = grad_bias.template cast<U>();
        return out;
    }
};

/// Weights [in, out], zero bias [out], Glorot-uniform initialised.
template <typename T>
LayerParams<T> make_dense_params(std::size_t in, std::size_t out, Rng& rng);

/// Weights [k, k, c_in, c_out] (or [c_in, c_out] for k = 1), Glorot-uniform.
template <typename T>
LayerParams<T> make_conv_params(std::size_t c_in, std::size_t c_out, int kernel, Rng& rng);

// ---------------------------------------------------------------------------
// Affine layers
// ---------------------------------------------------------------------------

// y = xW + b over the last axis of x.
template <typename T>
Tensor<T> dense_apply(const Tensor<T>& x, const LayerParams<T>& p);

// Accumulates into p.grad_*; returns dL/dx, or an empty tensor if !need_dx.
template <typename T>
Tensor<T> dense_backward(const Tensor<T>& x, const Tensor<T>& dy, LayerParams<T>& p,
                         bool need_dx = true);

// x is [H, W, C_in]. kernel 1 delegates to dense_apply per cell; kernel 3 is a
// same-padded (zero) cross-correlation.
template <typename T>
Tensor<T> conv_apply(const Tensor<T>& x, const LayerParams<T>& p, int kernel);

template <typename T>
Tensor<T> conv_backward(const Tensor<T>& x, const Tensor<T>& dy, LayerParams<T>& p, int kernel,
                        bool need_dx = true);

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

template <typename T>
T sigmoid(T z);

template <typename T>
Tensor<T> pointwise(const Tensor<T>& x, Activation f);

// Backward expressed through the forward output y.
template <typename T>
Tensor<T> pointwise_backward(const Tensor<T>& y, const Tensor<T>& dy, Activation f);

template <typename T>
struct DropoutResult {
    Tensor<T> output;
    Tensor<T> mask;  // 0 or 1/(1 - rate) per value; all ones in eval mode
};

template <typename T>
DropoutResult<T> dropout(const Tensor<T>& x, double rate, Mode mode, Rng& rng);

// ---------------------------------------------------------------------------
// LSTM cell. Weight [in + hid, 4 * hid], bias [4 * hid]; gate blocks are
// ordered input, forget, candidate, output.
// ---------------------------------------------------------------------------

template <typename T>
struct LstmCache {
    Tensor<T> x, h_prev, c_prev;
    Tensor<T> i, f, g, o;
    Tensor<T> c, tanh_c;
};

template <typename T>
struct LstmState {
    Tensor<T> h;
    Tensor<T> c;
};

template <typename T>
LstmState<T> lstm_step(const Tensor<T>& x_t, const Tensor<T>& h_prev, const Tensor<T>& c_prev,
                       const LayerParams<T>& p, LstmCache<T>* cache = nullptr);

template <typename T>
struct LstmGrads {
    Tensor<T> dx, dh_prev, dc_prev;
};

template <typename T>
LstmGrads<T> lstm_step_backward(const LstmCache<T>& cache, const Tensor<T>& dh,
                                const Tensor<T>& dc, LayerParams<T>& p);

// ---------------------------------------------------------------------------
// Per-channel standardisation over all cells of one feature map, with learned
// scale (weight) and shift (bias). Eval mode uses supplied running statistics.
// ---------------------------------------------------------------------------

template <typename T>
struct ChannelNormCache {
    Tensor<T> x_hat;
    std::vector<T> mean, var, inv_std;
    bool batch_stats = true;
};

template <typename T>
Tensor<T> channel_norm(const Tensor<T>& x, const LayerParams<T>& p, Mode mode,
                       const std::vector<T>& running_mean, const std::vector<T>& running_var,
                       ChannelNormCache<T>* cache = nullptr);

template <typename T>
Tensor<T> channel_norm_backward(const ChannelNormCache<T>& cache, const Tensor<T>& dy,
                                LayerParams<T>& p);

inline constexpr double kNormEpsilon = 1e-5;

}  // namespace gridvqa
