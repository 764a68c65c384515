#include "gridvqa/pointer_model.hpp"

#include <cmath>
#include <map>

#include "gridvqa/errors.hpp"

namespace gridvqa {

namespace {

template <typename T>
Tensor<T> as_map(Tensor<T> t) {
    const std::size_t g0 = t.extent(0), g1 = t.extent(1);
    return std::move(t).reshaped({g0, g1});
}

template <typename T>
Tensor<T> as_channel(const Tensor<T>& map) {
    return map.reshaped({map.extent(0), map.extent(1), 1});
}

template <typename T>
void require_grid(const Tensor<T>& f_m, std::size_t channels, const char* what) {
    if (f_m.rank() != 3 || f_m.extent(2) != channels) {
        throw DimensionError(std::string(what) + ": fused features " + shape_str(f_m.shape()) + " need " +
                             std::to_string(channels) + " channels");
    }
}

template <typename T>
LayerParams<T> make_norm_params(std::size_t channels) {
    LayerParams<T> p({channels}, {channels});
    p.weight.fill(T(1));
    return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// AttentionLayer
// ---------------------------------------------------------------------------

template <typename T>
AttentionLayer<T>::AttentionLayer(const ModelConfig& cfg, Rng& rng)
    : conv_a(make_conv_params<T>(cfg.fused_channels(), cfg.attention_hidden, 1, rng)),
      conv_b(make_conv_params<T>(cfg.attention_hidden, cfg.attention_dim, 1, rng)),
      dense_q(make_dense_params<T>(cfg.question_dim, cfg.attention_dim, rng)),
      conv_out(make_conv_params<T>(cfg.attention_dim, 1, 1, rng)) {}

template <typename T>
Tensor<T> AttentionLayer<T>::forward(const Tensor<T>& f_m, const Tensor<T>& f_q, Cache* cache) const {
    require_grid(f_m, conv_a.weight.extent(0), "attention");
    if (f_q.rank() != 1 || f_q.size() != dense_q.weight.extent(0)) {
        throw DimensionError("attention: question vector " + shape_str(f_q.shape()) + " vs dense weight " +
                             shape_str(dense_q.weight.shape()));
    }
    Tensor<T> hidden = pointwise(conv_apply(f_m, conv_a, 1), Activation::Tanh);
    Tensor<T> joint = conv_apply(hidden, conv_b, 1);
    Tensor<T> q_act = pointwise(dense_apply(f_q, dense_q), Activation::Tanh);
    const std::size_t dim = q_act.size();
    for (std::size_t i = 0; i < joint.size(); ++i) joint[i] = std::tanh(joint[i] + q_act[i % dim]);
    Tensor<T> p = as_map(pointwise(conv_apply(joint, conv_out, 1), Activation::Sigmoid));
    if (cache) *cache = Cache{f_q, std::move(hidden), std::move(q_act), std::move(joint), p};
    return p;
}

template <typename T>
Tensor<T> AttentionLayer<T>::backward(const Tensor<T>& f_m, const Cache& c, const Tensor<T>& d_logit) {
    Tensor<T> d_joint = conv_backward(c.joint, as_channel(d_logit), conv_out, 1);
    Tensor<T> d_sum = pointwise_backward(c.joint, d_joint, Activation::Tanh);
    const std::size_t dim = c.q_act.size();
    Tensor<T> d_qact({dim});
    for (std::size_t i = 0; i < d_sum.size(); ++i) d_qact[i % dim] += d_sum[i];
    Tensor<T> d_qpre = pointwise_backward(c.q_act, d_qact, Activation::Tanh);
    Tensor<T> d_fq = dense_backward(c.f_q, d_qpre, dense_q);
    Tensor<T> d_hidden = conv_backward(c.hidden, d_sum, conv_b, 1);
    Tensor<T> d_apre = pointwise_backward(c.hidden, d_hidden, Activation::Tanh);
    conv_backward(f_m, d_apre, conv_a, 1, /*need_dx=*/false);
    return d_fq;
}

template <typename T>
std::vector<ParamRef<T>> AttentionLayer<T>::params(const std::string& prefix) {
    return {{prefix + "conv_a", &conv_a}, {prefix + "conv_b", &conv_b}, {prefix + "dense_q", &dense_q},
            {prefix + "conv_out", &conv_out}};
}

// ---------------------------------------------------------------------------
// FcnHead
// ---------------------------------------------------------------------------

template <typename T>
FcnHead<T>::FcnHead(const ModelConfig& cfg, Rng& rng)
    : conv1(make_conv_params<T>(cfg.fused_channels() + cfg.question_dim, cfg.fcn_channels1, 3, rng)),
      norm1(make_norm_params<T>(cfg.fcn_channels1)),
      conv2(make_conv_params<T>(cfg.fcn_channels1, cfg.fcn_channels2, 3, rng)),
      norm2(make_norm_params<T>(cfg.fcn_channels2)),
      conv3(make_conv_params<T>(cfg.fcn_channels2, 1, 3, rng)),
      running_mean1(cfg.fcn_channels1, T(0)),
      running_var1(cfg.fcn_channels1, T(1)),
      running_mean2(cfg.fcn_channels2, T(0)),
      running_var2(cfg.fcn_channels2, T(1)) {}

template <typename T>
Tensor<T> FcnHead<T>::forward(const Tensor<T>& f_m, const Tensor<T>& f_q, Mode mode, Cache* cache) const {
    const std::size_t c_in = conv1.weight.extent(2);
    if (f_m.rank() != 3 || f_m.extent(2) + f_q.size() != c_in) {
        throw DimensionError("fcn: fused features " + shape_str(f_m.shape()) + " plus question " +
                             shape_str(f_q.shape()) + " do not give " + std::to_string(c_in) + " channels");
    }
    const std::size_t h = f_m.extent(0), w = f_m.extent(1), cm = f_m.extent(2), q = f_q.size();
    Tensor<T> input({h, w, c_in});
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            std::copy_n(&f_m.at(r, c, 0), cm, &input.at(r, c, 0));
            std::copy_n(f_q.data(), q, &input.at(r, c, cm));
        }
    }
    Cache local;
    Cache& k = cache ? *cache : local;
    k.relu1 = pointwise(conv_apply(input, conv1, 3), Activation::Relu);
    k.norm1 = channel_norm(k.relu1, norm1, mode, running_mean1, running_var1, &k.norm1_cache);
    k.relu2 = pointwise(conv_apply(k.norm1, conv2, 3), Activation::Relu);
    k.norm2 = channel_norm(k.relu2, norm2, mode, running_mean2, running_var2, &k.norm2_cache);
    k.p = as_map(pointwise(conv_apply(k.norm2, conv3, 3), Activation::Sigmoid));
    k.input = std::move(input);
    k.question_width = q;
    return k.p;
}

template <typename T>
Tensor<T> FcnHead<T>::backward(const Cache& k, const Tensor<T>& d_logit) {
    Tensor<T> d = conv_backward(k.norm2, as_channel(d_logit), conv3, 3);
    d = channel_norm_backward(k.norm2_cache, d, norm2);
    d = pointwise_backward(k.relu2, d, Activation::Relu);
    d = conv_backward(k.norm1, d, conv2, 3);
    d = channel_norm_backward(k.norm1_cache, d, norm1);
    d = pointwise_backward(k.relu1, d, Activation::Relu);
    d = conv_backward(k.input, d, conv1, 3);
    const std::size_t c_in = k.input.extent(2);
    const std::size_t q = k.question_width;
    Tensor<T> d_fq({q});
    const std::size_t cm = c_in - q;
    for (std::size_t cell = 0; cell < d.size() / c_in; ++cell)
        for (std::size_t j = 0; j < q; ++j) d_fq[j] += d[cell * c_in + cm + j];
    return d_fq;
}

template <typename T>
void FcnHead<T>::absorb_statistics(const Cache& k, double momentum) {
    const T m = static_cast<T>(momentum);
    auto blend = [m](std::vector<T>& running, const std::vector<T>& batch) {
        for (std::size_t i = 0; i < running.size(); ++i) running[i] = (T(1) - m) * running[i] + m * batch[i];
    };
    blend(running_mean1, k.norm1_cache.mean);
    blend(running_var1, k.norm1_cache.var);
    blend(running_mean2, k.norm2_cache.mean);
    blend(running_var2, k.norm2_cache.var);
}

template <typename T>
std::vector<ParamRef<T>> FcnHead<T>::params(const std::string& prefix) {
    return {{prefix + "conv1", &conv1}, {prefix + "norm1", &norm1}, {prefix + "conv2", &conv2},
            {prefix + "norm2", &norm2}, {prefix + "conv3", &conv3}};
}

template <typename T>
std::vector<BufferRef<T>> FcnHead<T>::buffers(const std::string& prefix) {
    return {{prefix + "norm1.running_mean", &running_mean1}, {prefix + "norm1.running_var", &running_var1},
            {prefix + "norm2.running_mean", &running_mean2}, {prefix + "norm2.running_var", &running_var2}};
}

// ---------------------------------------------------------------------------
// PointerModel
// ---------------------------------------------------------------------------

template <typename T>
PointerModel<T>::PointerModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    question = QuestionEncoder<T>(cfg_, rng);
    switch (cfg_.stack) {
        case StackMode::Single:
            attention.emplace_back(cfg_, rng);
            break;
        case StackMode::Stacked:
            attention.emplace_back(cfg_, rng);
            attention.emplace_back(cfg_, rng);
            bridge = make_dense_params<T>(cfg_.fused_channels(), cfg_.question_dim, rng);
            break;
        case StackMode::Fcn:
            fcn = FcnHead<T>(cfg_, rng);
            break;
    }
}

template <typename T>
Tensor<T> PointerModel<T>::forward(const Tensor<T>& f_m, const std::vector<Tensor<T>>& words, Mode mode,
                                   Rng& rng, Cache* cache) const {
    require_grid(f_m, cfg_.fused_channels(), "pointer model");
    Cache local;
    Cache& k = cache ? *cache : local;
    k.f_q = question.forward(words, mode, rng, cache ? &k.question : nullptr);

    if (cfg_.stack == StackMode::Fcn) {
        k.p = fcn.forward(f_m, k.f_q, mode, &k.fcn);
        return k.p;
    }
    k.attention.assign(attention.size(), {});
    Tensor<T> p1 = attention[0].forward(f_m, k.f_q, &k.attention[0]);
    if (attention.size() == 1) {
        k.p = std::move(p1);
        return k.p;
    }
    // Weighted average of f_m under the sum-normalised first map.
    double total = 0.0;
    for (T v : p1.values()) total += static_cast<double>(v);
    k.weights = p1;
    for (auto& v : k.weights.values()) v = static_cast<T>(static_cast<double>(v) / total);
    const std::size_t cm = f_m.extent(2);
    k.context = Tensor<T>({cm});
    for (std::size_t cell = 0; cell < k.weights.size(); ++cell) {
        const T wc = k.weights[cell];
        const T* row = f_m.data() + cell * cm;
        for (std::size_t j = 0; j < cm; ++j) k.context[j] += wc * row[j];
    }
    k.q2 = dense_apply(k.context, bridge);
    for (std::size_t j = 0; j < k.q2.size(); ++j) k.q2[j] += k.f_q[j];
    k.p = attention[1].forward(f_m, k.q2, &k.attention[1]);
    return k.p;
}

template <typename T>
void PointerModel<T>::backward(const Tensor<T>& f_m, const Cache& k, const Tensor<T>& gt_mask) {
    require_same_shape(k.p.shape(), gt_mask.shape(), "pointer model backward");
    // Sigmoid + cell-summed BCE: dE/dlogit = p - g.
    Tensor<T> d_logit(k.p.shape());
    for (std::size_t i = 0; i < d_logit.size(); ++i) d_logit[i] = k.p[i] - gt_mask[i];

    Tensor<T> d_fq;
    if (cfg_.stack == StackMode::Fcn) {
        d_fq = fcn.backward(k.fcn, d_logit);
    } else if (attention.size() == 1) {
        d_fq = attention[0].backward(f_m, k.attention[0], d_logit);
    } else {
        Tensor<T> d_q2 = attention[1].backward(f_m, k.attention[1], d_logit);
        Tensor<T> d_context = dense_backward(k.context, d_q2, bridge);
        const std::size_t cells = k.weights.size();
        const std::size_t cm = f_m.extent(2);
        Tensor<T> d_w({cells});
        T weighted = 0;
        for (std::size_t cell = 0; cell < cells; ++cell) {
            const T* row = f_m.data() + cell * cm;
            T acc = 0;
            for (std::size_t j = 0; j < cm; ++j) acc += d_context[j] * row[j];
            d_w[cell] = acc;
            weighted += k.weights[cell] * acc;
        }
        T total = 0;
        for (T v : k.attention[0].p.values()) total += v;
        const Tensor<T>& p1 = k.attention[0].p;
        Tensor<T> d_logit1(p1.shape());
        for (std::size_t cell = 0; cell < cells; ++cell) {
            const T d_p1 = (d_w[cell] - weighted) / total;
            d_logit1[cell] = d_p1 * p1[cell] * (T(1) - p1[cell]);
        }
        d_fq = attention[0].backward(f_m, k.attention[0], d_logit1);
        for (std::size_t j = 0; j < d_fq.size(); ++j) d_fq[j] += d_q2[j];
    }
    question.backward(k.question, d_fq);
}

template <typename T>
double PointerModel<T>::train_step(const Tensor<T>& f_m, const std::vector<Tensor<T>>& words,
                                   const Tensor<T>& gt_mask, Rng& rng, bool update_statistics) {
    Cache cache;
    forward(f_m, words, Mode::Train, rng, &cache);
    const double loss = bce_loss(cache.p, gt_mask);
    backward(f_m, cache, gt_mask);
    if (update_statistics && cfg_.stack == StackMode::Fcn) fcn.absorb_statistics(cache.fcn);
    return loss;
}

template <typename T>
std::vector<ParamRef<T>> PointerModel<T>::params() {
    auto out = question.params("question.");
    for (std::size_t i = 0; i < attention.size(); ++i) {
        auto more = attention[i].params("attention" + std::to_string(i) + ".");
        out.insert(out.end(), more.begin(), more.end());
    }
    if (cfg_.stack == StackMode::Stacked) out.push_back({"bridge", &bridge});
    if (cfg_.stack == StackMode::Fcn) {
        auto more = fcn.params("fcn.");
        out.insert(out.end(), more.begin(), more.end());
    }
    return out;
}

template <typename T>
std::vector<BufferRef<T>> PointerModel<T>::buffers() {
    if (cfg_.stack == StackMode::Fcn) return fcn.buffers("fcn.");
    return {};
}

template <typename T>
std::vector<CheckpointRecord> PointerModel<T>::to_records() const {
    auto& self = const_cast<PointerModel<T>&>(*this);
    std::vector<CheckpointRecord> out;
    for (const auto& p : self.params()) {
        out.push_back({p.name + ".weight", p.params->weight.template cast<float>()});
        out.push_back({p.name + ".bias", p.params->bias.template cast<float>()});
    }
    for (const auto& b : self.buffers()) {
        out.push_back({b.name, Tensor<float>({b.values->size()}, std::vector<float>(b.values->begin(), b.values->end()))});
    }
    return out;
}

template <typename T>
void PointerModel<T>::load_records(const std::vector<CheckpointRecord>& records) {
    std::map<std::string, const Tensor<float>*> by_name;
    for (const auto& r : records) by_name[r.name] = &r.value;

    std::size_t used = 0;
    auto take = [&](const std::string& name, const Shape& shape) -> const Tensor<float>& {
        auto it = by_name.find(name);
        if (it == by_name.end()) {
            throw ConfigError("checkpoint incompatible with model: missing record \"" + name + "\"");
        }
        if (it->second->shape() != shape) {
            throw ConfigError("checkpoint incompatible with model: record \"" + name + "\" has shape " +
                              shape_str(it->second->shape()) + ", model expects " + shape_str(shape));
        }
        ++used;
        return *it->second;
    };
    for (const auto& p : params()) {
        p.params->weight = take(p.name + ".weight", p.params->weight.shape()).template cast<T>();
        p.params->bias = take(p.name + ".bias", p.params->bias.shape()).template cast<T>();
        p.params->zero_grad();
    }
    for (const auto& b : buffers()) {
        const auto& t = take(b.name, Shape{b.values->size()});
        b.values->assign(t.values().begin(), t.values().end());
    }
    if (used != by_name.size()) {
        throw ConfigError("checkpoint incompatible with model: it holds " + std::to_string(by_name.size()) +
                          " records, the " + to_string(cfg_.stack) + " model uses " + std::to_string(used));
    }
}

template <typename T>
Tensor<T> stacked_forward(const PointerModel<T>& model, const Tensor<T>& f_m, const Tensor<T>& f_q) {
    if (model.config().stack == StackMode::Fcn) throw ContractError("stacked_forward needs a pointer-mode model");
    Tensor<T> p1 = model.attention[0].forward(f_m, f_q);
    if (model.attention.size() == 1) return p1;
    double total = 0.0;
    for (T v : p1.values()) total += static_cast<double>(v);
    const std::size_t cm = f_m.extent(2);
    Tensor<T> context({cm});
    for (std::size_t cell = 0; cell < p1.size(); ++cell) {
        const T wc = static_cast<T>(static_cast<double>(p1[cell]) / total);
        for (std::size_t j = 0; j < cm; ++j) context[j] += wc * f_m[cell * cm + j];
    }
    Tensor<T> q2 = dense_apply(context, model.bridge);
    for (std::size_t j = 0; j < q2.size(); ++j) q2[j] += f_q[j];
    return model.attention[1].forward(f_m, q2);
}

template <typename T>
double bce_loss(const Tensor<T>& p, const Tensor<T>& g) {
    require_same_shape(p.shape(), g.shape(), "bce_loss");
    double e = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pc = std::clamp(static_cast<double>(p[i]), kProbabilityClamp, 1.0 - kProbabilityClamp);
        const double gv = static_cast<double>(g[i]);
        e -= gv * std::log(pc) + (1.0 - gv) * std::log(1.0 - pc);
    }
    return e;
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

GridCell argmax_cell(const Tensor<float>& p_att) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < p_att.size(); ++i) {
        if (p_att[i] > p_att[best]) best = i;
    }
    const std::size_t cols = p_att.extent(1);
    return {best / cols, best % cols};
}

ExampleGrid prepare_grid(const QaExample& example, const Providers& providers, std::size_t grid) {
    GridAssignment assignment = build_text_grid(example.ocr, providers.embeddings, grid);
    Tensor<float> visual = providers.features.get(example.image_id, grid);
    Tensor<float> fused = fuse(visual, assignment.text_grid);
    return {std::move(assignment), std::move(fused)};
}

PredictionOutput decode_prediction(Tensor<float> p_att, const GridAssignment& assignment, const QaExample& example) {
    PredictionOutput out;
    out.argmax_cell = argmax_cell(p_att);
    out.confidence = p_att.at(out.argmax_cell.row, out.argmax_cell.col);
    if (const auto& tok = assignment.token_at(out.argmax_cell); tok) out.answer_text = example.ocr.at(*tok).text;
    out.p_att = std::move(p_att);
    return out;
}

template <typename T>
std::vector<PredictionOutput> predict_multiscale(const PointerModel<T>& model, const QaExample& example,
                                                 const Providers& providers, const std::vector<std::size_t>& grids) {
    const auto words = embed_question<T>(providers.embeddings, example.question, model.config().max_question_length);
    Rng unused(0);
    std::vector<PredictionOutput> out;
    for (std::size_t g : grids) {
        auto eg = prepare_grid(example, providers, g);
        Tensor<T> p = model.forward(eg.fused.template cast<T>(), words, Mode::Eval, unused);
        out.push_back(decode_prediction(p.template cast<float>(), eg.assignment, example));
    }
    return out;
}

template <typename T>
PredictionOutput predict(const PointerModel<T>& model, const QaExample& example, const Providers& providers) {
    return predict_multiscale(model, example, providers, {providers.features.grid()}).front();
}

#define GRIDVQA_INSTANTIATE_MODEL(T)                                                                 \
    template struct AttentionLayer<T>;                                                               \
    template struct FcnHead<T>;                                                                      \
    template class PointerModel<T>;                                                                  \
    template Tensor<T> stacked_forward<T>(const PointerModel<T>&, const Tensor<T>&, const Tensor<T>&); \
    template double bce_loss<T>(const Tensor<T>&, const Tensor<T>&);                                 \
    template PredictionOutput predict<T>(const PointerModel<T>&, const QaExample&, const Providers&); \
    template std::vector<PredictionOutput> predict_multiscale<T>(const PointerModel<T>&, const QaExample&, \
                                                                 const Providers&, const std::vector<std::size_t>&);

GRIDVQA_INSTANTIATE_MODEL(float)
GRIDVQA_INSTANTIATE_MODEL(double)

#undef GRIDVQA_INSTANTIATE_MODEL

}  // namespace gridvqa
