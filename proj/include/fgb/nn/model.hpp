#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "fgb/common.hpp"
#include "fgb/gbdt/objective.hpp"
#include "fgb/nn/config.hpp"

namespace fgb::nn {

namespace detail {

// One linear layer's slice of the flat parameter vector: weights row-major
// (out x in) at w_off, biases (out) at b_off.
struct LayerShape {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t w_off = 0;
    std::size_t b_off = 0;
};

// Encoder layers in order, head last.
inline std::vector<LayerShape> layer_layout(const EncoderConfig& config) {
    std::vector<LayerShape> layout;
    std::size_t off = 0;
    std::size_t prev = config.input_dim;
    auto add = [&](std::size_t in, std::size_t out) {
        layout.push_back({in, out, off, off + in * out});
        off += in * out + out;
    };
    for (auto h : config.hidden_dims) {
        add(prev, h);
        prev = h;
    }
    add(prev, config.feature_dim);
    add(config.feature_dim, config.num_classes);
    return layout;
}

inline std::size_t param_count(const EncoderConfig& config) {
    auto layout = layer_layout(config);
    const LayerShape& last = layout.back();
    return last.b_off + last.out;
}

inline void init_layer(Rng& rng, double* w, double* b, std::size_t in, std::size_t out) {
    const double s = 1.0 / std::sqrt(static_cast<double>(in));
    for (std::size_t i = 0; i < in * out; ++i) w[i] = rng.uniform(-s, s);
    for (std::size_t o = 0; o < out; ++o) b[o] = 0.0;
}

}  // namespace detail

// All parameters live in one flat vector (encoder layers first, head last),
// mirrored by the Adam moment vectors. Flat storage keeps the optimizer,
// checkpointing and finite-difference testing uniform.
struct ModelState {
    EncoderConfig config;
    std::vector<double> params;
    std::vector<double> adam_m;
    std::vector<double> adam_v;
    std::uint64_t adam_step = 0;
    Rng rng;
};

inline ModelState init_model(const EncoderConfig& config) {
    config.validate();
    ModelState state;
    state.config = config;
    state.rng = Rng(config.seed);
    const std::size_t count = detail::param_count(config);
    state.params.resize(count);
    state.adam_m.assign(count, 0.0);
    state.adam_v.assign(count, 0.0);
    for (const auto& shape : detail::layer_layout(config))
        detail::init_layer(state.rng, state.params.data() + shape.w_off,
                           state.params.data() + shape.b_off, shape.in, shape.out);
    return state;
}

enum class Mode { kTrain, kEval };

// Everything backward needs from the forward pass.
struct ForwardTrace {
    Matrix input;
    std::vector<Matrix> pre;   // per encoder layer, pre-activation
    std::vector<Matrix> post;  // per encoder layer, post-activation
    Matrix features;           // head input: post.back() with dropout in train mode
    std::vector<double> dropout_scale;  // per feature entry; empty when inactive
    Matrix logits;
};

struct ForwardResult {
    Matrix features;
    Matrix logits;
};

// Single forward pass. features is the last encoder layer's post-activation
// output; in train mode dropout is applied to it (inverted scaling) before
// the head, and those dropped features are what the caller sees: they are
// the head's actual input. Eval mode never touches the rng.
inline ForwardResult forward(const ModelState& state, const Matrix& inputs, Mode mode,
                             Rng* rng = nullptr, ForwardTrace* trace = nullptr) {
    const EncoderConfig& config = state.config;
    check(inputs.cols() == config.input_dim,
          "forward: input width " + std::to_string(inputs.cols()) + " != config " +
              std::to_string(config.input_dim));
    for (double v : inputs.storage()) check(std::isfinite(v), "forward: non-finite input");

    const auto layout = detail::layer_layout(config);
    const std::size_t n_enc = layout.size() - 1;
    const std::size_t b = inputs.rows();
    const bool use_dropout =
        mode == Mode::kTrain && config.dropout_rate > 0.0;
    if (mode == Mode::kTrain) check(rng != nullptr, "forward: train mode needs an rng");

    if (trace) {
        trace->input = inputs;
        trace->pre.assign(n_enc, Matrix());
        trace->post.assign(n_enc, Matrix());
        trace->dropout_scale.clear();
    }

    Matrix cur = inputs;
    for (std::size_t l = 0; l < n_enc; ++l) {
        const auto& shape = layout[l];
        const double* w = state.params.data() + shape.w_off;
        const double* bias = state.params.data() + shape.b_off;
        Matrix z(b, shape.out);
        for (std::size_t i = 0; i < b; ++i) {
            const double* x = cur.row(i);
            double* zr = z.row(i);
            for (std::size_t o = 0; o < shape.out; ++o) {
                double s = bias[o];
                const double* wr = w + o * shape.in;
                for (std::size_t k = 0; k < shape.in; ++k) s += x[k] * wr[k];
                zr[o] = s;
            }
        }
        Matrix a(b, shape.out);
        if (config.activation == Activation::kTanh) {
            for (std::size_t i = 0; i < z.size(); ++i)
                a.storage()[i] = std::tanh(z.storage()[i]);
        } else {
            for (std::size_t i = 0; i < z.size(); ++i)
                a.storage()[i] = z.storage()[i] > 0.0 ? z.storage()[i] : 0.0;
        }
        if (trace) {
            trace->pre[l] = std::move(z);
            trace->post[l] = a;
        }
        cur = std::move(a);
    }

    Matrix features = std::move(cur);
    if (use_dropout) {
        const double keep_scale = 1.0 / (1.0 - config.dropout_rate);
        std::vector<double> scale(features.size());
        for (std::size_t i = 0; i < features.size(); ++i) {
            scale[i] = rng->uniform() >= config.dropout_rate ? keep_scale : 0.0;
            features.storage()[i] *= scale[i];
        }
        if (trace) trace->dropout_scale = std::move(scale);
    }

    const auto& head = layout.back();
    const double* hw = state.params.data() + head.w_off;
    const double* hb = state.params.data() + head.b_off;
    Matrix logits(b, head.out);
    for (std::size_t i = 0; i < b; ++i) {
        const double* f = features.row(i);
        double* lr = logits.row(i);
        for (std::size_t o = 0; o < head.out; ++o) {
            double s = hb[o];
            const double* wr = hw + o * head.in;
            for (std::size_t k = 0; k < head.in; ++k) s += f[k] * wr[k];
            lr[o] = s;
        }
    }

    if (trace) {
        trace->features = features;
        trace->logits = logits;
    }
    return {std::move(features), std::move(logits)};
}

// Mean cross entropy of logits against integer labels.
inline double cross_entropy_loss(const Matrix& logits, const std::vector<int>& labels) {
    check(labels.size() == logits.rows(), "cross_entropy_loss: label count mismatch");
    for (std::size_t i = 0; i < labels.size(); ++i)
        check(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < logits.cols(),
              "cross_entropy_loss: label out of range at row " + std::to_string(i));
    return gbdt::softmax_log_loss(logits, labels);
}

// Reverse-mode gradients of the mean cross entropy w.r.t. every parameter,
// aligned with ModelState::params.
inline std::vector<double> backward(const ModelState& state, const ForwardTrace& trace,
                                    const std::vector<int>& labels) {
    const EncoderConfig& config = state.config;
    const auto layout = detail::layer_layout(config);
    const std::size_t n_enc = layout.size() - 1;
    const std::size_t b = trace.input.rows();
    check(labels.size() == b, "backward: label count mismatch");

    std::vector<double> grads(state.params.size(), 0.0);

    // d loss / d logits = (softmax - onehot) / b
    Matrix dlogits(b, config.num_classes);
    std::vector<double> probs(config.num_classes);
    const double inv_b = 1.0 / static_cast<double>(b);
    for (std::size_t i = 0; i < b; ++i) {
        gbdt::softmax_row(trace.logits.row(i), config.num_classes, probs.data());
        for (std::size_t j = 0; j < config.num_classes; ++j)
            dlogits(i, j) =
                (probs[j] - (static_cast<std::size_t>(labels[i]) == j ? 1.0 : 0.0)) * inv_b;
    }

    // Head layer.
    const auto& head = layout.back();
    const double* hw = state.params.data() + head.w_off;
    double* ghw = grads.data() + head.w_off;
    double* ghb = grads.data() + head.b_off;
    Matrix dfeat(b, head.in);
    for (std::size_t i = 0; i < b; ++i) {
        const double* f = trace.features.row(i);
        const double* dl = dlogits.row(i);
        double* df = dfeat.row(i);
        for (std::size_t o = 0; o < head.out; ++o) {
            const double d = dl[o];
            double* gwr = ghw + o * head.in;
            const double* wr = hw + o * head.in;
            ghb[o] += d;
            for (std::size_t k = 0; k < head.in; ++k) {
                gwr[k] += d * f[k];
                df[k] += d * wr[k];
            }
        }
    }

    if (!trace.dropout_scale.empty())
        for (std::size_t i = 0; i < dfeat.size(); ++i)
            dfeat.storage()[i] *= trace.dropout_scale[i];

    // Encoder layers, last to first.
    Matrix dpost = std::move(dfeat);
    for (std::size_t l = n_enc; l-- > 0;) {
        const auto& shape = layout[l];
        const Matrix& z = trace.pre[l];
        const Matrix& a = trace.post[l];
        Matrix dz(b, shape.out);
        if (config.activation == Activation::kTanh) {
            for (std::size_t i = 0; i < dz.size(); ++i)
                dz.storage()[i] =
                    dpost.storage()[i] * (1.0 - a.storage()[i] * a.storage()[i]);
        } else {
            for (std::size_t i = 0; i < dz.size(); ++i)
                dz.storage()[i] = z.storage()[i] > 0.0 ? dpost.storage()[i] : 0.0;
        }

        const Matrix& in = l == 0 ? trace.input : trace.post[l - 1];
        const double* w = state.params.data() + shape.w_off;
        double* gw = grads.data() + shape.w_off;
        double* gb = grads.data() + shape.b_off;
        Matrix din(b, shape.in);
        for (std::size_t i = 0; i < b; ++i) {
            const double* x = in.row(i);
            const double* dzr = dz.row(i);
            double* dir = din.row(i);
            for (std::size_t o = 0; o < shape.out; ++o) {
                const double d = dzr[o];
                double* gwr = gw + o * shape.in;
                const double* wr = w + o * shape.in;
                gb[o] += d;
                for (std::size_t k = 0; k < shape.in; ++k) {
                    gwr[k] += d * x[k];
                    dir[k] += d * wr[k];
                }
            }
        }
        dpost = std::move(din);
    }
    return grads;
}

}  // namespace fgb::nn
