#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fgb/common.hpp"
#include "fgb/gbdt/binning.hpp"
#include "fgb/gbdt/objective.hpp"
#include "fgb/gbdt/params.hpp"
#include "fgb/gbdt/tree.hpp"

namespace fgb::gbdt {

constexpr std::uint32_t kEnsembleFormatVersion = 1;

// Per-round training loss, loss[0] being the prior-only model.
struct FitTrace {
    std::vector<double> loss;
};

struct Ensemble {
    GbdtParams params;
    std::uint32_t n_features = 0;
    std::vector<double> init_scores;      // K scores, or 1 for the logistic objective
    std::vector<std::vector<Tree>> trees;  // [round][class], one tree per round if logistic

    std::size_t score_columns() const { return init_scores.size(); }

    // Raw additive scores: init + sum of learning-rate-scaled leaf values.
    Matrix predict_raw(const Matrix& features) const {
        check(features.cols() == n_features,
              "predict: feature count mismatch (got " + std::to_string(features.cols()) +
                  ", trained on " + std::to_string(n_features) + ")");
        const std::size_t m = features.rows();
        const std::size_t k = score_columns();
        Matrix raw(m, k);
        for (std::size_t i = 0; i < m; ++i) {
            const double* row = features.row(i);
            double* out = raw.row(i);
            for (std::size_t j = 0; j < k; ++j) out[j] = init_scores[j];
            for (const auto& round : trees)
                for (std::size_t j = 0; j < k; ++j)
                    out[j] += params.learning_rate * round[j].route(row);
        }
        return raw;
    }

    Matrix predict_proba(const Matrix& features) const {
        Matrix raw = predict_raw(features);
        return proba_from_raw(raw);
    }

    Matrix proba_from_raw(const Matrix& raw) const {
        const std::size_t m = raw.rows();
        Matrix proba(m, params.num_classes);
        if (params.resolved_objective() == Objective::kLogistic) {
            for (std::size_t i = 0; i < m; ++i) {
                double p = sigmoid(raw(i, 0));
                proba(i, 0) = 1.0 - p;
                proba(i, 1) = p;
            }
        } else {
            for (std::size_t i = 0; i < m; ++i)
                softmax_row(raw.row(i), params.num_classes, proba.row(i));
        }
        return proba;
    }

    std::vector<int> predict_class(const Matrix& features) const {
        Matrix proba = predict_proba(features);
        return argmax_rows(proba);
    }

    static std::vector<int> argmax_rows(const Matrix& proba) {
        std::vector<int> out(proba.rows());
        for (std::size_t i = 0; i < proba.rows(); ++i) {
            int best = 0;
            for (std::size_t j = 1; j < proba.cols(); ++j)
                if (proba(i, j) > proba(i, best)) best = static_cast<int>(j);
            out[i] = best;
        }
        return out;
    }

    // Prefix of the boosting sequence; identical to retraining with fewer
    // rounds since each tree depends only on earlier rounds.
    Ensemble truncated(std::uint32_t rounds) const {
        check(rounds >= 1 && rounds <= trees.size(), "truncated: rounds out of range");
        Ensemble out = *this;
        out.params.boosting_rounds = rounds;
        out.trees.resize(rounds);
        return out;
    }

    std::vector<std::uint8_t> serialize() const {
        ByteWriter w;
        w.magic("FGBM");
        w.u32(kEnsembleFormatVersion);
        w.f64(params.learning_rate);
        w.u32(params.max_leaves);
        w.u32(params.boosting_rounds);
        w.u32(params.num_classes);
        w.f64(params.l2_lambda);
        w.u32(params.min_samples_leaf);
        w.u32(params.max_bins);
        w.u64(params.seed);
        w.u32(static_cast<std::uint32_t>(params.objective));
        w.u32(n_features);
        w.u32(static_cast<std::uint32_t>(init_scores.size()));
        for (double s : init_scores) w.f64(s);
        w.u32(static_cast<std::uint32_t>(trees.size()));
        w.u32(trees.empty() ? 0 : static_cast<std::uint32_t>(trees.front().size()));
        for (const auto& round : trees)
            for (const Tree& t : round) {
                w.u32(static_cast<std::uint32_t>(t.nodes.size()));
                w.u32(t.root);
                for (const TreeNode& nd : t.nodes) {
                    w.u8(nd.is_leaf() ? 0 : 1);
                    w.u32(nd.feature);
                    w.u16(nd.split_bin);
                    w.f64(nd.threshold);
                    w.i32(nd.left);
                    w.i32(nd.right);
                    w.f64(nd.value);
                }
            }
        return w.bytes();
    }

    static Ensemble deserialize(ByteReader& r) {
        r.expect_magic("FGBM", "ensemble");
        std::uint32_t version = r.u32();
        check(version == kEnsembleFormatVersion,
              "ensemble: unsupported format version " + std::to_string(version));
        Ensemble e;
        e.params.learning_rate = r.f64();
        e.params.max_leaves = r.u32();
        e.params.boosting_rounds = r.u32();
        e.params.num_classes = r.u32();
        e.params.l2_lambda = r.f64();
        e.params.min_samples_leaf = r.u32();
        e.params.max_bins = r.u32();
        e.params.seed = r.u64();
        e.params.objective = static_cast<Objective>(r.u32());
        e.n_features = r.u32();
        std::uint32_t n_init = r.u32();
        e.init_scores.resize(n_init);
        for (auto& s : e.init_scores) s = r.f64();
        std::uint32_t rounds = r.u32();
        std::uint32_t per_round = r.u32();
        e.trees.resize(rounds);
        for (auto& round : e.trees) {
            round.resize(per_round);
            for (Tree& t : round) {
                std::uint32_t n_nodes = r.u32();
                t.root = r.u32();
                t.nodes.resize(n_nodes);
                for (TreeNode& nd : t.nodes) {
                    std::uint8_t kind = r.u8();
                    nd.feature = r.u32();
                    nd.split_bin = r.u16();
                    nd.threshold = r.f64();
                    nd.left = r.i32();
                    nd.right = r.i32();
                    nd.value = r.f64();
                    check((kind == 0) == nd.is_leaf(), "ensemble: corrupt node kind");
                }
            }
        }
        check(r.exhausted(), "ensemble: trailing bytes");
        return e;
    }

    void save(const std::string& path) const {
        auto bytes = serialize();
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        check(out.good(), "cannot open for writing: " + path);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        check(out.good(), "short write: " + path);
    }

    static Ensemble load(const std::string& path) {
        ByteReader r = ByteReader::from_file(path);
        return deserialize(r);
    }
};

namespace detail {

inline std::vector<double> initial_scores(const std::vector<int>& labels,
                                          std::uint32_t num_classes, Objective objective) {
    std::vector<double> counts(num_classes, 0.0);
    for (int y : labels) counts[static_cast<std::size_t>(y)] += 1.0;
    const double n = static_cast<double>(labels.size());
    if (objective == Objective::kLogistic) {
        // log odds; +-inf when a class is absent keeps the degenerate
        // prior exact (sigmoid saturates to 0 or 1).
        return {std::log(counts[1] / n) - std::log(counts[0] / n)};
    }
    std::vector<double> init(num_classes);
    for (std::uint32_t c = 0; c < num_classes; ++c)
        init[c] = std::log(counts[c] / n);
    return init;
}

}  // namespace detail

// Newton boosting: each round fits one tree per score column to the current
// gradients and adds learning-rate-scaled leaf values into the raw scores.
// Rows are consumed in caller order and never shuffled.
inline Ensemble fit(const Matrix& features, const std::vector<int>& labels,
                    const GbdtParams& params, FitTrace* trace = nullptr) {
    params.validate();
    const std::size_t n = features.rows();
    check(n >= 2, "fit: need at least 2 samples");
    check(labels.size() == n, "fit: label count mismatch");
    for (std::size_t i = 0; i < n; ++i)
        check(labels[i] >= 0 && static_cast<std::uint32_t>(labels[i]) < params.num_classes,
              "fit: label out of range at row " + std::to_string(i));

    const Objective objective = params.resolved_objective();
    const std::size_t k = objective == Objective::kLogistic ? 1 : params.num_classes;

    BinnedDataset binned = bin_features(features, params.max_bins);

    Ensemble ensemble;
    ensemble.params = params;
    ensemble.n_features = static_cast<std::uint32_t>(features.cols());
    ensemble.init_scores = detail::initial_scores(labels, params.num_classes, objective);

    Matrix scores(n, k);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) scores(i, j) = ensemble.init_scores[j];

    auto loss = [&]() {
        return objective == Objective::kLogistic ? logistic_log_loss(scores, labels)
                                                 : softmax_log_loss(scores, labels);
    };
    if (trace) {
        trace->loss.clear();
        trace->loss.push_back(loss());
    }

    Matrix grad, hess;
    std::vector<double> gcol(n), hcol(n);
    std::vector<std::uint32_t> leaf_of(n);

    for (std::uint32_t round = 0; round < params.boosting_rounds; ++round) {
        compute_gradients(scores, labels, objective, &grad, &hess);
        std::vector<Tree> round_trees;
        round_trees.reserve(k);
        for (std::size_t j = 0; j < k; ++j) {
            for (std::size_t i = 0; i < n; ++i) {
                gcol[i] = grad(i, j);
                hcol[i] = hess(i, j);
            }
            Tree tree = grow_tree(binned, gcol, hcol, params, &leaf_of);
            for (std::size_t i = 0; i < n; ++i)
                scores(i, j) += params.learning_rate * tree.nodes[leaf_of[i]].value;
            round_trees.push_back(std::move(tree));
        }
        ensemble.trees.push_back(std::move(round_trees));
        if (trace) trace->loss.push_back(loss());
    }
    return ensemble;
}

}  // namespace fgb::gbdt
