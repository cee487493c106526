#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <vector>

#include "fgb/common.hpp"
#include "fgb/nn/config.hpp"
#include "fgb/nn/model.hpp"
#include "fgb/nn/optim.hpp"

namespace fgb::nn {

inline std::size_t steps_per_epoch(std::size_t n, std::uint32_t batch_size) {
    return (n + batch_size - 1) / batch_size;
}

// Observation points inside the minibatch loop. on_batch_features fires
// after the forward pass and before the parameter update, receiving the
// train-mode features of rows [row_begin, row_end), the hook the feature
// store hangs off. All hooks are optional.
struct TrainHooks {
    std::function<void(std::size_t rows)> on_forward_rows;
    std::function<void(std::uint32_t epoch, std::uint64_t step, std::size_t row_begin,
                       std::size_t row_end, const Matrix& features)>
        on_batch_features;
    std::function<void(std::uint32_t epoch, double mean_loss)> on_epoch_end;
};

// Minibatch training with the one-cycle schedule. Batches are consecutive
// row slices in dataset order, identical every epoch: the data is never
// shuffled, so visitation order is reproducible and caller-controlled.
// Returns per-epoch mean training loss.
inline std::vector<double> train_loop(ModelState& state, const Matrix& inputs,
                                      const std::vector<int>& labels,
                                      const TrainConfig& config,
                                      const TrainHooks& hooks = {}) {
    config.validate();
    const std::size_t n = inputs.rows();
    check(n >= 1, "train_loop: empty dataset");
    check(labels.size() == n, "train_loop: label count mismatch");
    for (std::size_t i = 0; i < n; ++i)
        check(labels[i] >= 0 &&
                  static_cast<std::uint32_t>(labels[i]) < state.config.num_classes,
              "train_loop: label out of range at row " + std::to_string(i));

    const std::size_t per_epoch = steps_per_epoch(n, config.batch_size);
    const std::uint64_t total_steps = static_cast<std::uint64_t>(per_epoch) * config.epochs;
    std::uint64_t step = 0;
    std::vector<double> epoch_losses;
    epoch_losses.reserve(config.epochs);

    Matrix batch_x;
    std::vector<int> batch_y;
    ForwardTrace trace;

    for (std::uint32_t epoch = 1; epoch <= config.epochs; ++epoch) {
        double loss_sum = 0.0;
        for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
            const std::size_t end = std::min(begin + config.batch_size, n);
            const std::size_t rows = end - begin;
            batch_x = Matrix(rows, inputs.cols());
            batch_y.resize(rows);
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < inputs.cols(); ++j)
                    batch_x(i, j) = inputs(begin + i, j);
                batch_y[i] = labels[begin + i];
            }

            ForwardResult out = forward(state, batch_x, Mode::kTrain, &state.rng, &trace);
            if (hooks.on_forward_rows) hooks.on_forward_rows(rows);
            if (hooks.on_batch_features)
                hooks.on_batch_features(epoch, step, begin, end, out.features);

            double loss = cross_entropy_loss(out.logits, batch_y);
            check(std::isfinite(loss), "training diverged: non-finite loss at step " +
                                           std::to_string(step));
            loss_sum += loss * static_cast<double>(rows);

            std::vector<double> grads = backward(state, trace, batch_y);
            if (config.weight_decay > 0.0)
                for (std::size_t i = 0; i < grads.size(); ++i)
                    grads[i] += config.weight_decay * state.params[i];

            adam_step(state, grads,
                      one_cycle_lr(step, total_steps, config.max_learning_rate));
            ++step;
        }
        const double mean_loss = loss_sum / static_cast<double>(n);
        epoch_losses.push_back(mean_loss);
        if (hooks.on_epoch_end) hooks.on_epoch_end(epoch, mean_loss);
    }
    return epoch_losses;
}

// Intermediate supervised pretraining: train the encoder on a related task
// (possibly with a different class count) behind a temporary head, then
// re-initialize the head randomly for the target task and reset the
// optimizer. epochs=0 is a no-op. Returns per-epoch pretraining loss.
inline std::vector<double> pretrain(ModelState& state, const Matrix& inputs,
                                    const std::vector<int>& labels,
                                    std::uint32_t pretrain_classes,
                                    const TrainConfig& config) {
    if (config.epochs == 0) return {};
    check(pretrain_classes >= 2, "pretrain: need at least 2 classes");
    check(inputs.cols() == state.config.input_dim, "pretrain: input width mismatch");

    const auto layout = detail::layer_layout(state.config);
    const std::size_t encoder_params = layout.back().w_off;  // head starts here

    ModelState tmp;
    tmp.config = state.config;
    tmp.config.num_classes = pretrain_classes;
    tmp.rng = state.rng;
    const std::size_t tmp_count = detail::param_count(tmp.config);
    tmp.params.assign(tmp_count, 0.0);
    for (std::size_t i = 0; i < encoder_params; ++i) tmp.params[i] = state.params[i];
    {
        const auto tmp_head = detail::layer_layout(tmp.config).back();
        detail::init_layer(tmp.rng, tmp.params.data() + tmp_head.w_off,
                           tmp.params.data() + tmp_head.b_off, tmp_head.in, tmp_head.out);
    }
    tmp.adam_m.assign(tmp_count, 0.0);
    tmp.adam_v.assign(tmp_count, 0.0);

    std::vector<double> losses = train_loop(tmp, inputs, labels, config);

    // Carry the trained encoder back; fresh random head and optimizer for
    // the target task.
    for (std::size_t i = 0; i < encoder_params; ++i) state.params[i] = tmp.params[i];
    const auto& head = layout.back();
    detail::init_layer(tmp.rng, state.params.data() + head.w_off,
                       state.params.data() + head.b_off, head.in, head.out);
    state.adam_m.assign(state.params.size(), 0.0);
    state.adam_v.assign(state.params.size(), 0.0);
    state.adam_step = 0;
    state.rng = tmp.rng;
    return losses;
}

}  // namespace fgb::nn
