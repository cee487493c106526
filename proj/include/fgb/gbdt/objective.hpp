#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "fgb/common.hpp"
#include "fgb/gbdt/params.hpp"

namespace fgb::gbdt {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// softmax of one row of raw scores, numerically stabilised. Supports -inf
// entries (classes absent from the training labels keep probability zero).
inline void softmax_row(const double* raw, std::size_t k, double* out) {
    double m = raw[0];
    for (std::size_t j = 1; j < k; ++j) m = std::max(m, raw[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        out[j] = std::exp(raw[j] - m);
        sum += out[j];
    }
    for (std::size_t j = 0; j < k; ++j) out[j] /= sum;
}

// First/second-order derivatives of the classification loss w.r.t. raw
// scores. Softmax: g_k = p_k - 1[y=k], h_k = p_k (1 - p_k). Logistic uses a
// single score column: g = sigmoid(s) - y, h = sigmoid(s) (1 - sigmoid(s)).
inline void compute_gradients(const Matrix& raw_scores, const std::vector<int>& labels,
                              Objective objective, Matrix* grad, Matrix* hess) {
    check(objective != Objective::kAuto, "compute_gradients: objective must be resolved");
    const std::size_t n = raw_scores.rows();
    const std::size_t k = raw_scores.cols();
    check(labels.size() == n, "compute_gradients: label count mismatch");

    *grad = Matrix(n, k);
    *hess = Matrix(n, k);

    if (objective == Objective::kLogistic) {
        check(k == 1, "compute_gradients: logistic expects one score column");
        for (std::size_t i = 0; i < n; ++i) {
            check(labels[i] == 0 || labels[i] == 1,
                  "compute_gradients: label out of range at row " + std::to_string(i));
            // +-inf scores arise from degenerate priors; sigmoid saturates.
            double p = sigmoid(raw_scores(i, 0));
            (*grad)(i, 0) = p - static_cast<double>(labels[i]);
            (*hess)(i, 0) = p * (1.0 - p);
        }
        return;
    }

    std::vector<double> probs(k);
    for (std::size_t i = 0; i < n; ++i) {
        check(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < k,
              "compute_gradients: label out of range at row " + std::to_string(i));
        softmax_row(raw_scores.row(i), k, probs.data());
        for (std::size_t j = 0; j < k; ++j) {
            double p = probs[j];
            (*grad)(i, j) = p - (static_cast<std::size_t>(labels[i]) == j ? 1.0 : 0.0);
            (*hess)(i, j) = p * (1.0 - p);
        }
    }
}

// Newton-step loss reduction of splitting a node into (L, R).
inline double split_gain(double g_left, double h_left, double g_right, double h_right,
                         double l2_lambda) {
    auto term = [l2_lambda](double g, double h) { return g * g / (h + l2_lambda); };
    return 0.5 * (term(g_left, h_left) + term(g_right, h_right) -
                  term(g_left + g_right, h_left + h_right));
}

// Mean multiclass log-loss of raw scores (softmax objective).
inline double softmax_log_loss(const Matrix& raw_scores, const std::vector<int>& labels) {
    const std::size_t n = raw_scores.rows();
    const std::size_t k = raw_scores.cols();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = raw_scores.row(i);
        double m = row[0];
        for (std::size_t j = 1; j < k; ++j) m = std::max(m, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) sum += std::exp(row[j] - m);
        total += std::log(sum) + m - row[static_cast<std::size_t>(labels[i])];
    }
    return total / static_cast<double>(n);
}

// Mean binary log-loss of a single raw score column.
inline double logistic_log_loss(const Matrix& raw_scores, const std::vector<int>& labels) {
    const std::size_t n = raw_scores.rows();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = raw_scores(i, 0);
        // -log p(y) = log(1 + exp(-s)) for y=1, log(1 + exp(s)) for y=0
        double z = labels[i] == 1 ? -s : s;
        total += z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    }
    return total / static_cast<double>(n);
}

}  // namespace fgb::gbdt
