#pragma once

#include <cstdint>

#include "fgb/common.hpp"

namespace fgb::gbdt {

enum class Objective : std::uint32_t {
    kAuto = 0,      // logistic for 2 classes, softmax otherwise
    kSoftmax = 1,   // one tree per class per round
    kLogistic = 2,  // binary only, one tree per round
};

struct GbdtParams {
    double learning_rate = 0.1;
    std::uint32_t max_leaves = 256;
    std::uint32_t boosting_rounds = 10;
    std::uint32_t num_classes = 2;
    double l2_lambda = 1.0;
    std::uint32_t min_samples_leaf = 20;
    std::uint32_t max_bins = 255;
    std::uint64_t seed = 0;
    Objective objective = Objective::kAuto;

    Objective resolved_objective() const {
        if (objective != Objective::kAuto) return objective;
        return num_classes == 2 ? Objective::kLogistic : Objective::kSoftmax;
    }

    // Number of trees grown per boosting round.
    std::uint32_t trees_per_round() const {
        return resolved_objective() == Objective::kLogistic ? 1u : num_classes;
    }

    void validate() const {
        check(learning_rate > 0.0, "learning_rate must be > 0");
        check(max_leaves >= 2, "max_leaves must be >= 2");
        check(boosting_rounds >= 1, "boosting_rounds must be >= 1");
        check(num_classes >= 2, "num_classes must be >= 2");
        check(l2_lambda >= 0.0, "l2_lambda must be >= 0");
        check(min_samples_leaf >= 1, "min_samples_leaf must be >= 1");
        check(max_bins >= 2 && max_bins <= 65535, "max_bins must be in [2, 65535]");
        check(objective != Objective::kLogistic || num_classes == 2,
              "logistic objective requires exactly 2 classes");
    }
};

}  // namespace fgb::gbdt
