#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fgb/common.hpp"

namespace fgb::eval {

inline double accuracy(const std::vector<int>& pred, const std::vector<int>& gold) {
    check(pred.size() == gold.size(), "accuracy: length mismatch");
    check(!pred.empty(), "accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == gold[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

// F1 with the usual zero-division convention: an undefined precision,
// recall, or F1 scores 0 and raises the flag so callers can tell a true
// zero from a degenerate one.
struct F1Result {
    double value = 0.0;
    bool zero_division = false;
};

inline F1Result f1_binary(const std::vector<int>& pred, const std::vector<int>& gold,
                          int positive_class) {
    check(pred.size() == gold.size(), "f1_binary: length mismatch");
    check(!pred.empty(), "f1_binary: empty input");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] == positive_class;
        const bool g = gold[i] == positive_class;
        if (p && g) ++tp;
        if (p && !g) ++fp;
        if (!p && g) ++fn;
    }
    F1Result r;
    if (tp == 0) {
        // Precision, recall, or the F1 ratio itself is 0/0 here.
        r.zero_division = true;
        r.value = 0.0;
        return r;
    }
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    r.value = 2.0 * precision * recall / (precision + recall);
    return r;
}

inline F1Result macro_f1(const std::vector<int>& pred, const std::vector<int>& gold,
                         std::uint32_t num_classes) {
    check(num_classes >= 2, "macro_f1: need at least 2 classes");
    F1Result r;
    double sum = 0.0;
    for (std::uint32_t c = 0; c < num_classes; ++c) {
        F1Result f = f1_binary(pred, gold, static_cast<int>(c));
        sum += f.value;
        r.zero_division = r.zero_division || f.zero_division;
    }
    r.value = sum / static_cast<double>(num_classes);
    return r;
}

// Mean of macro F1 and accuracy, the leaderboard-style blended score for
// imbalanced tasks.
inline double cb_metric(const std::vector<int>& pred, const std::vector<int>& gold,
                        std::uint32_t num_classes) {
    return 0.5 * (macro_f1(pred, gold, num_classes).value + accuracy(pred, gold));
}

struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0;
    bool single = false;  // std undefined for one value, reported as 0
};

inline MeanStd mean_std(const std::vector<double>& values) {
    check(!values.empty(), "mean_std: empty input");
    MeanStd r;
    bool constant = true;
    for (double v : values) constant = constant && v == values.front();
    if (constant) {
        // Exact (c, 0) for constant input, immune to summation rounding.
        r.mean = values.front();
        r.single = values.size() == 1;
        return r;
    }
    for (double v : values) r.mean += v;
    r.mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    return r;
}

}  // namespace fgb::eval
