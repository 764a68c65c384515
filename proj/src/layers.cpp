#include "gridvqa/layers.hpp"

#include <cmath>
#include <limits>

namespace gridvqa {

namespace {

template <typename T>
void glorot_fill(Tensor<T>& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& v : w.values()) v = static_cast<T>(rng.uniform(-limit, limit));
}

// y[n, :] = b + x[n, :] W  for n rows.
template <typename T>
void affine_rows(const T* x, std::size_t rows, std::size_t in, const T* w, const T* b,
                 std::size_t out, T* y) {
    for (std::size_t n = 0; n < rows; ++n) {
        T* yr = y + n * out;
        for (std::size_t o = 0; o < out; ++o) yr[o] = b[o];
        const T* xr = x + n * in;
        for (std::size_t i = 0; i < in; ++i) {
            const T xi = xr[i];
            if (xi == T(0)) continue;
            const T* wr = w + i * out;
            for (std::size_t o = 0; o < out; ++o) yr[o] += xi * wr[o];
        }
    }
}

template <typename T>
void affine_rows_backward(const T* x, const T* dy, std::size_t rows, std::size_t in,
                          const T* w, std::size_t out, T* gw, T* gb, T* dx) {
    for (std::size_t n = 0; n < rows; ++n) {
        const T* dyr = dy + n * out;
        const T* xr = x + n * in;
        for (std::size_t o = 0; o < out; ++o) gb[o] += dyr[o];
        for (std::size_t i = 0; i < in; ++i) {
            const T xi = xr[i];
            const T* wr = w + i * out;
            if (xi != T(0)) {
                T* gwr = gw + i * out;
                for (std::size_t o = 0; o < out; ++o) gwr[o] += xi * dyr[o];
            }
            if (dx) {
                T acc = 0;
                for (std::size_t o = 0; o < out; ++o) acc += wr[o] * dyr[o];
                dx[n * in + i] = acc;
            }
        }
    }
}

void check_kernel(int kernel) {
    if (kernel != 1 && kernel != 3) {
        throw ConfigError("unsupported convolution kernel size " + std::to_string(kernel) +
                          " (expected 1 or 3)");
    }
}

template <typename T>
void check_conv_input(const Tensor<T>& x, const LayerParams<T>& p, int kernel) {
    check_kernel(kernel);
    if (x.rank() != 3) throw DimensionError("conv input must be [H, W, C], got " + shape_str(x.shape()));
    const std::size_t expected_rank = kernel == 1 ? 2 : 4;
    if (p.weight.rank() != expected_rank) {
        throw DimensionError("conv weight " + shape_str(p.weight.shape()) + " does not match kernel " +
                             std::to_string(kernel));
    }
    const std::size_t c_in = p.weight.extent(expected_rank - 2);
    if (x.extent(2) != c_in) {
        throw DimensionError("conv input " + shape_str(x.shape()) + " vs weight " +
                             shape_str(p.weight.shape()));
    }
}

}  // namespace

template <typename T>
LayerParams<T> make_dense_params(std::size_t in, std::size_t out, Rng& rng) {
    LayerParams<T> p({in, out}, {out});
    glorot_fill(p.weight, in, out, rng);
    return p;
}

template <typename T>
LayerParams<T> make_conv_params(std::size_t c_in, std::size_t c_out, int kernel, Rng& rng) {
    check_kernel(kernel);
    if (kernel == 1) return make_dense_params<T>(c_in, c_out, rng);
    const auto k = static_cast<std::size_t>(kernel);
    LayerParams<T> p({k, k, c_in, c_out}, {c_out});
    glorot_fill(p.weight, c_in * k * k, c_out * k * k, rng);
    return p;
}

template <typename T>
Tensor<T> dense_apply(const Tensor<T>& x, const LayerParams<T>& p) {
    if (p.weight.rank() != 2 || x.rank() == 0 || x.shape().back() != p.weight.extent(0)) {
        throw DimensionError("dense: input " + shape_str(x.shape()) + " incompatible with weight " +
                             shape_str(p.weight.shape()));
    }
    const std::size_t in = p.weight.extent(0);
    const std::size_t out = p.weight.extent(1);
    Shape out_shape = x.shape();
    out_shape.back() = out;
    Tensor<T> y(out_shape);
    affine_rows(x.data(), x.size() / in, in, p.weight.data(), p.bias.data(), out, y.data());
    return y;
}

template <typename T>
Tensor<T> dense_backward(const Tensor<T>& x, const Tensor<T>& dy, LayerParams<T>& p, bool need_dx) {
    const std::size_t in = p.weight.extent(0);
    const std::size_t out = p.weight.extent(1);
    if (dy.size() / out != x.size() / in) {
        throw DimensionError("dense backward: input " + shape_str(x.shape()) + " vs grad " +
                             shape_str(dy.shape()));
    }
    Tensor<T> dx;
    if (need_dx) dx = Tensor<T>(x.shape());
    affine_rows_backward(x.data(), dy.data(), x.size() / in, in, p.weight.data(), out,
                         p.grad_weight.data(), p.grad_bias.data(), need_dx ? dx.data() : nullptr);
    return dx;
}

template <typename T>
Tensor<T> conv_apply(const Tensor<T>& x, const LayerParams<T>& p, int kernel) {
    check_conv_input(x, p, kernel);
    if (kernel == 1) return dense_apply(x, p);

    const std::size_t h = x.extent(0), w = x.extent(1), c_in = x.extent(2);
    const std::size_t c_out = p.weight.extent(3);
    Tensor<T> y({h, w, c_out});
    const T* wt = p.weight.data();
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            T* yr = &y.at(r, c, 0);
            for (std::size_t o = 0; o < c_out; ++o) yr[o] = p.bias[o];
            for (int dr = 0; dr < 3; ++dr) {
                const auto rr = static_cast<std::ptrdiff_t>(r) + dr - 1;
                if (rr < 0 || rr >= static_cast<std::ptrdiff_t>(h)) continue;
                for (int dc = 0; dc < 3; ++dc) {
                    const auto cc = static_cast<std::ptrdiff_t>(c) + dc - 1;
                    if (cc < 0 || cc >= static_cast<std::ptrdiff_t>(w)) continue;
                    const T* xr = &x.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc), 0);
                    const T* wk = wt + (static_cast<std::size_t>(dr) * 3 + static_cast<std::size_t>(dc)) * c_in * c_out;
                    for (std::size_t i = 0; i < c_in; ++i) {
                        const T xi = xr[i];
                        if (xi == T(0)) continue;
                        const T* wr = wk + i * c_out;
                        for (std::size_t o = 0; o < c_out; ++o) yr[o] += xi * wr[o];
                    }
                }
            }
        }
    }
    return y;
}

template <typename T>
Tensor<T> conv_backward(const Tensor<T>& x, const Tensor<T>& dy, LayerParams<T>& p, int kernel,
                        bool need_dx) {
    check_conv_input(x, p, kernel);
    if (kernel == 1) return dense_backward(x, dy, p, need_dx);

    const std::size_t h = x.extent(0), w = x.extent(1), c_in = x.extent(2);
    const std::size_t c_out = p.weight.extent(3);
    require_same_shape(dy.shape(), Shape{h, w, c_out}, "conv backward");
    Tensor<T> dx;
    if (need_dx) dx = Tensor<T>(x.shape());
    const T* wt = p.weight.data();
    T* gw = p.grad_weight.data();
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            const T* dyr = &dy.at(r, c, 0);
            for (std::size_t o = 0; o < c_out; ++o) p.grad_bias[o] += dyr[o];
            for (int dr = 0; dr < 3; ++dr) {
                const auto rr = static_cast<std::ptrdiff_t>(r) + dr - 1;
                if (rr < 0 || rr >= static_cast<std::ptrdiff_t>(h)) continue;
                for (int dc = 0; dc < 3; ++dc) {
                    const auto cc = static_cast<std::ptrdiff_t>(c) + dc - 1;
                    if (cc < 0 || cc >= static_cast<std::ptrdiff_t>(w)) continue;
                    const std::size_t ur = static_cast<std::size_t>(rr), uc = static_cast<std::size_t>(cc);
                    const T* xr = &x.at(ur, uc, 0);
                    const std::size_t koff = (static_cast<std::size_t>(dr) * 3 + static_cast<std::size_t>(dc)) * c_in * c_out;
                    for (std::size_t i = 0; i < c_in; ++i) {
                        const T xi = xr[i];
                        const T* wr = wt + koff + i * c_out;
                        if (xi != T(0)) {
                            T* gwr = gw + koff + i * c_out;
                            for (std::size_t o = 0; o < c_out; ++o) gwr[o] += xi * dyr[o];
                        }
                        if (need_dx) {
                            T acc = 0;
                            for (std::size_t o = 0; o < c_out; ++o) acc += wr[o] * dyr[o];
                            dx.at(ur, uc, i) += acc;
                        }
                    }
                }
            }
        }
    }
    return dx;
}

template <typename T>
T sigmoid(T z) {
    // Keep the result strictly inside (0, 1) even when exp saturates.
    constexpr T lo = std::numeric_limits<T>::min();
    constexpr T hi = T(1) - std::numeric_limits<T>::epsilon() / 2;
    const T s = z >= 0 ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
    return std::clamp(s, lo, hi);
}

template <typename T>
Tensor<T> pointwise(const Tensor<T>& x, Activation f) {
    Tensor<T> y = x;
    for (auto& v : y.values()) {
        switch (f) {
            case Activation::Tanh: v = std::tanh(v); break;
            case Activation::Sigmoid: v = sigmoid(v); break;
            case Activation::Relu: v = v > T(0) ? v : T(0); break;
        }
    }
    return y;
}

template <typename T>
Tensor<T> pointwise_backward(const Tensor<T>& y, const Tensor<T>& dy, Activation f) {
    require_same_shape(y.shape(), dy.shape(), "pointwise backward");
    Tensor<T> dx(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const T v = y[i];
        switch (f) {
            case Activation::Tanh: dx[i] = dy[i] * (T(1) - v * v); break;
            case Activation::Sigmoid: dx[i] = dy[i] * v * (T(1) - v); break;
            case Activation::Relu: dx[i] = v > T(0) ? dy[i] : T(0); break;
        }
    }
    return dx;
}

template <typename T>
DropoutResult<T> dropout(const Tensor<T>& x, double rate, Mode mode, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
    }
    DropoutResult<T> r{x, Tensor<T>(x.shape(), T(1))};
    if (mode == Mode::Eval || rate == 0.0) return r;
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T m = rng.bernoulli(rate) ? T(0) : keep_scale;
        r.mask[i] = m;
        r.output[i] = x[i] * m;
    }
    return r;
}

template <typename T>
LstmState<T> lstm_step(const Tensor<T>& x_t, const Tensor<T>& h_prev, const Tensor<T>& c_prev,
                       const LayerParams<T>& p, LstmCache<T>* cache) {
    const std::size_t hid = h_prev.size();
    const std::size_t in = x_t.size();
    if (c_prev.size() != hid || p.weight.rank() != 2 || p.weight.extent(0) != in + hid ||
        p.weight.extent(1) != 4 * hid || p.bias.size() != 4 * hid) {
        throw DimensionError("lstm: input " + shape_str(x_t.shape()) + ", state " +
                             shape_str(h_prev.shape()) + " incompatible with weight " +
                             shape_str(p.weight.shape()));
    }
    Tensor<T> xh({in + hid});
    std::copy(x_t.data(), x_t.data() + in, xh.data());
    std::copy(h_prev.data(), h_prev.data() + hid, xh.data() + in);
    Tensor<T> z({4 * hid});
    affine_rows(xh.data(), 1, in + hid, p.weight.data(), p.bias.data(), 4 * hid, z.data());

    Tensor<T> i({hid}), f({hid}), g({hid}), o({hid}), c({hid}), tc({hid}), h({hid});
    for (std::size_t k = 0; k < hid; ++k) {
        i[k] = sigmoid(z[k]);
        f[k] = sigmoid(z[hid + k]);
        g[k] = std::tanh(z[2 * hid + k]);
        o[k] = sigmoid(z[3 * hid + k]);
        c[k] = f[k] * c_prev[k] + i[k] * g[k];
        tc[k] = std::tanh(c[k]);
        h[k] = o[k] * tc[k];
    }
    if (cache) *cache = LstmCache<T>{x_t, h_prev, c_prev, i, f, g, o, c, tc};
    return {std::move(h), std::move(c)};
}

template <typename T>
LstmGrads<T> lstm_step_backward(const LstmCache<T>& k, const Tensor<T>& dh, const Tensor<T>& dc,
                                LayerParams<T>& p) {
    const std::size_t hid = k.h_prev.size();
    const std::size_t in = k.x.size();
    Tensor<T> dz({4 * hid});
    LstmGrads<T> out{Tensor<T>({in}), Tensor<T>({hid}), Tensor<T>({hid})};
    for (std::size_t j = 0; j < hid; ++j) {
        const T dct = dc[j] + dh[j] * k.o[j] * (T(1) - k.tanh_c[j] * k.tanh_c[j]);
        const T di = dct * k.g[j];
        const T df = dct * k.c_prev[j];
        const T dg = dct * k.i[j];
        const T dout = dh[j] * k.tanh_c[j];
        dz[j] = di * k.i[j] * (T(1) - k.i[j]);
        dz[hid + j] = df * k.f[j] * (T(1) - k.f[j]);
        dz[2 * hid + j] = dg * (T(1) - k.g[j] * k.g[j]);
        dz[3 * hid + j] = dout * k.o[j] * (T(1) - k.o[j]);
        out.dc_prev[j] = dct * k.f[j];
    }
    Tensor<T> xh({in + hid});
    std::copy(k.x.data(), k.x.data() + in, xh.data());
    std::copy(k.h_prev.data(), k.h_prev.data() + hid, xh.data() + in);
    Tensor<T> dxh({in + hid});
    affine_rows_backward(xh.data(), dz.data(), 1, in + hid, p.weight.data(), 4 * hid,
                         p.grad_weight.data(), p.grad_bias.data(), dxh.data());
    std::copy(dxh.data(), dxh.data() + in, out.dx.data());
    std::copy(dxh.data() + in, dxh.data() + in + hid, out.dh_prev.data());
    return out;
}

template <typename T>
Tensor<T> channel_norm(const Tensor<T>& x, const LayerParams<T>& p, Mode mode,
                       const std::vector<T>& running_mean, const std::vector<T>& running_var,
                       ChannelNormCache<T>* cache) {
    const std::size_t ch = x.shape().back();
    if (p.weight.size() != ch || p.bias.size() != ch) {
        throw DimensionError("channel norm: input " + shape_str(x.shape()) + " vs scale " +
                             shape_str(p.weight.shape()));
    }
    const std::size_t cells = x.size() / ch;
    std::vector<T> mean(ch, T(0)), var(ch, T(0)), inv_std(ch);
    const bool batch_stats = mode == Mode::Train;
    if (batch_stats) {
        for (std::size_t n = 0; n < cells; ++n)
            for (std::size_t k = 0; k < ch; ++k) mean[k] += x[n * ch + k];
        for (auto& m : mean) m /= static_cast<T>(cells);
        for (std::size_t n = 0; n < cells; ++n)
            for (std::size_t k = 0; k < ch; ++k) {
                const T d = x[n * ch + k] - mean[k];
                var[k] += d * d;
            }
        for (auto& v : var) v /= static_cast<T>(cells);
    } else {
        if (running_mean.size() != ch || running_var.size() != ch) {
            throw DimensionError("channel norm: running statistics do not match " + std::to_string(ch) +
                                 " channels");
        }
        mean = running_mean;
        var = running_var;
    }
    for (std::size_t k = 0; k < ch; ++k) inv_std[k] = T(1) / std::sqrt(var[k] + static_cast<T>(kNormEpsilon));

    Tensor<T> x_hat(x.shape());
    Tensor<T> y(x.shape());
    for (std::size_t n = 0; n < cells; ++n) {
        for (std::size_t k = 0; k < ch; ++k) {
            const std::size_t idx = n * ch + k;
            x_hat[idx] = (x[idx] - mean[k]) * inv_std[k];
            y[idx] = p.weight[k] * x_hat[idx] + p.bias[k];
        }
    }
    if (cache) *cache = ChannelNormCache<T>{std::move(x_hat), std::move(mean), std::move(var),
                                            std::move(inv_std), batch_stats};
    return y;
}

template <typename T>
Tensor<T> channel_norm_backward(const ChannelNormCache<T>& k, const Tensor<T>& dy, LayerParams<T>& p) {
    const std::size_t ch = p.weight.size();
    const std::size_t cells = dy.size() / ch;
    std::vector<T> sum_dxh(ch, T(0)), sum_dxh_xh(ch, T(0));
    for (std::size_t n = 0; n < cells; ++n) {
        for (std::size_t j = 0; j < ch; ++j) {
            const std::size_t idx = n * ch + j;
            p.grad_weight[j] += dy[idx] * k.x_hat[idx];
            p.grad_bias[j] += dy[idx];
            const T dxh = dy[idx] * p.weight[j];
            sum_dxh[j] += dxh;
            sum_dxh_xh[j] += dxh * k.x_hat[idx];
        }
    }
    Tensor<T> dx(dy.shape());
    const T inv_n = T(1) / static_cast<T>(cells);
    for (std::size_t n = 0; n < cells; ++n) {
        for (std::size_t j = 0; j < ch; ++j) {
            const std::size_t idx = n * ch + j;
            const T dxh = dy[idx] * p.weight[j];
            if (k.batch_stats) {
                dx[idx] = k.inv_std[j] * (dxh - inv_n * sum_dxh[j] - k.x_hat[idx] * inv_n * sum_dxh_xh[j]);
            } else {
                dx[idx] = k.inv_std[j] * dxh;
            }
        }
    }
    return dx;
}

#define GRIDVQA_INSTANTIATE_LAYERS(T)                                                              \
    template LayerParams<T> make_dense_params<T>(std::size_t, std::size_t, Rng&);                 \
    template LayerParams<T> make_conv_params<T>(std::size_t, std::size_t, int, Rng&);             \
    template Tensor<T> dense_apply<T>(const Tensor<T>&, const LayerParams<T>&);                    \
    template Tensor<T> dense_backward<T>(const Tensor<T>&, const Tensor<T>&, LayerParams<T>&, bool); \
    template Tensor<T> conv_apply<T>(const Tensor<T>&, const LayerParams<T>&, int);                \
    template Tensor<T> conv_backward<T>(const Tensor<T>&, const Tensor<T>&, LayerParams<T>&, int, bool); \
    template T sigmoid<T>(T);                                                                      \
    template Tensor<T> pointwise<T>(const Tensor<T>&, Activation);                                 \
    template Tensor<T> pointwise_backward<T>(const Tensor<T>&, const Tensor<T>&, Activation);      \
    template DropoutResult<T> dropout<T>(const Tensor<T>&, double, Mode, Rng&);                    \
    template LstmState<T> lstm_step<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,       \
                                       const LayerParams<T>&, LstmCache<T>*);                      \
    template LstmGrads<T> lstm_step_backward<T>(const LstmCache<T>&, const Tensor<T>&,             \
                                                const Tensor<T>&, LayerParams<T>&);                \
    template Tensor<T> channel_norm<T>(const Tensor<T>&, const LayerParams<T>&, Mode,              \
                                       const std::vector<T>&, const std::vector<T>&,               \
                                       ChannelNormCache<T>*);                                      \
    template Tensor<T> channel_norm_backward<T>(const ChannelNormCache<T>&, const Tensor<T>&,      \
                                                LayerParams<T>&);

GRIDVQA_INSTANTIATE_LAYERS(float)
GRIDVQA_INSTANTIATE_LAYERS(double)

#undef GRIDVQA_INSTANTIATE_LAYERS

}  // namespace gridvqa
