#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "fgb/common.hpp"
#include "fgb/gbdt/ensemble.hpp"
#include "fgb/head/feature_store.hpp"
#include "fgb/nn/model.hpp"
#include "fgb/nn/train.hpp"

namespace fgb::head {

namespace detail {

// The canonical store-filling hook: one record per row of every train-mode
// minibatch, appended before the parameter update. sample_id is the global
// dataset row index.
inline std::function<void(std::uint32_t, std::uint64_t, std::size_t, std::size_t,
                          const Matrix&)>
store_append_hook(FeatureStore* store, const std::vector<int>& labels) {
    return [store, &labels](std::uint32_t epoch, std::uint64_t step, std::size_t begin,
                            std::size_t end, const Matrix& features) {
        for (std::size_t i = begin; i < end; ++i)
            store->append(epoch, step, i, static_cast<std::uint32_t>(labels[i]),
                          features.row(i - begin));
    };
}

}  // namespace detail

// Encoder usage accounting. The FreeGBDT's defining property is that it adds
// no forward passes beyond what fine-tuning and evaluation already cost, so
// every pipeline entry point that touches the encoder counts rows here.
struct RunInstrumentation {
    std::uint64_t forward_calls = 0;
    std::uint64_t forward_rows = 0;

    void count(std::uint64_t rows) {
        forward_calls += 1;
        forward_rows += rows;
    }

    bool operator==(const RunInstrumentation&) const = default;
};

// Fine-tune the encoder+head on the training split while logging every
// train-mode feature vector, in minibatch visitation order, before each
// parameter update. After E epochs the store holds exactly N*E records. On
// divergence the store keeps everything logged up to the failing step.
inline std::vector<double> fine_tune_accumulate(nn::ModelState& state, const Matrix& inputs,
                                                const std::vector<int>& labels,
                                                const nn::TrainConfig& config,
                                                FeatureStore* store,
                                                RunInstrumentation* instr = nullptr) {
    check(store != nullptr, "fine_tune_accumulate: store required");
    check(store->records.empty(), "fine_tune_accumulate: store must start empty");
    store->source = StoreSource::kDuringTraining;
    store->feature_dim = state.config.feature_dim;
    store->num_classes = state.config.num_classes;

    nn::TrainHooks hooks;
    if (instr) hooks.on_forward_rows = [instr](std::size_t rows) { instr->count(rows); };
    hooks.on_batch_features = detail::store_append_hook(store, labels);
    return nn::train_loop(state, inputs, labels, config, hooks);
}

// One eval-mode pass over the training split after fine-tuning; no
// parameter updates, no rng consumption.
inline FeatureStore extract_features_post(const nn::ModelState& state, const Matrix& inputs,
                                          const std::vector<int>& labels,
                                          RunInstrumentation* instr = nullptr) {
    check(inputs.rows() == labels.size(), "extract_features_post: label count mismatch");
    FeatureStore store;
    store.source = StoreSource::kPostTraining;
    store.feature_dim = state.config.feature_dim;
    store.num_classes = state.config.num_classes;

    nn::ForwardResult out = nn::forward(state, inputs, nn::Mode::kEval);
    if (instr) instr->count(inputs.rows());
    for (std::size_t i = 0; i < inputs.rows(); ++i)
        store.append(0, 0, i, static_cast<std::uint32_t>(labels[i]), out.features.row(i));
    return store;
}

namespace detail {

inline gbdt::Ensemble fit_store(const FeatureStore& store, gbdt::GbdtParams params) {
    check(!store.records.empty(), "gbdt head: empty feature store");
    params.num_classes = store.num_classes;
    Matrix features;
    std::vector<int> labels;
    store.to_matrix(&features, &labels);
    return gbdt::fit(features, labels, params);
}

}  // namespace detail

// Classification head trained on the N post-hoc extracted feature rows.
inline gbdt::Ensemble train_standard_gbdt(const FeatureStore& store,
                                          const gbdt::GbdtParams& params) {
    check(store.source == StoreSource::kPostTraining,
          "train_standard_gbdt: store source is " + store_source_name(store.source) +
              ", expected post_training");
    return detail::fit_store(store, params);
}

// Classification head trained on all N*E rows accumulated during
// fine-tuning. Never touches the encoder: the features are already paid for.
inline gbdt::Ensemble train_free_gbdt(const FeatureStore& store,
                                      const gbdt::GbdtParams& params) {
    check(store.source == StoreSource::kDuringTraining,
          "train_free_gbdt: store source is " + store_source_name(store.source) +
              ", expected during_training");
    return detail::fit_store(store, params);
}

struct RoundsSelection {
    std::uint32_t best_rounds = 0;
    double best_accuracy = 0.0;
    std::vector<std::pair<std::uint32_t, double>> candidate_accuracy;
    gbdt::Ensemble ensemble;  // truncated to best_rounds
};

// Pick the boosting-round count with the highest dev accuracy, ties toward
// fewer rounds. Boosting is a prefix process, so training once at the
// largest candidate and truncating gives bit-identical ensembles to
// training each candidate separately.
inline RoundsSelection select_boosting_rounds(const FeatureStore& store,
                                              const Matrix& dev_features,
                                              const std::vector<int>& dev_labels,
                                              const gbdt::GbdtParams& params,
                                              const std::vector<std::uint32_t>& candidates) {
    check(!candidates.empty(), "select_boosting_rounds: no candidates");
    check(dev_features.rows() == dev_labels.size() && dev_features.rows() >= 1,
          "select_boosting_rounds: bad dev split");
    std::vector<std::uint32_t> sorted = candidates;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    check(sorted.front() >= 1, "select_boosting_rounds: rounds must be >= 1");

    gbdt::GbdtParams full_params = params;
    full_params.boosting_rounds = sorted.back();
    full_params.num_classes = store.num_classes;
    gbdt::Ensemble full = store.source == StoreSource::kDuringTraining
                              ? train_free_gbdt(store, full_params)
                              : train_standard_gbdt(store, full_params);

    RoundsSelection sel;
    for (std::uint32_t rounds : sorted) {
        gbdt::Ensemble cut = full.truncated(rounds);
        std::vector<int> pred = cut.predict_class(dev_features);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < pred.size(); ++i)
            if (pred[i] == dev_labels[i]) ++hits;
        double acc = static_cast<double>(hits) / static_cast<double>(pred.size());
        sel.candidate_accuracy.emplace_back(rounds, acc);
        if (sel.best_rounds == 0 || acc > sel.best_accuracy) {
            sel.best_rounds = rounds;
            sel.best_accuracy = acc;
            sel.ensemble = std::move(cut);
        }
    }
    return sel;
}

}  // namespace fgb::head
