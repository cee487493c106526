#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fgb/common.hpp"

namespace fgb::nn {

enum class Activation : std::uint32_t { kTanh = 0, kRelu = 1 };

inline std::string activation_name(Activation a) {
    return a == Activation::kTanh ? "tanh" : "relu";
}

inline Activation parse_activation(const std::string& name) {
    if (name == "tanh") return Activation::kTanh;
    if (name == "relu") return Activation::kRelu;
    throw Error("unknown activation: " + name + " (expected tanh or relu)");
}

// Feed-forward encoder topology: input -> hidden_dims... -> feature_dim,
// each linear layer followed by the activation. The d-wide feature vector is
// the head's input; the head itself is a single linear layer to num_classes
// with dropout applied to its input in train mode.
struct EncoderConfig {
    std::uint32_t input_dim = 32;
    std::vector<std::uint32_t> hidden_dims = {128};
    std::uint32_t feature_dim = 64;
    std::uint32_t num_classes = 2;
    Activation activation = Activation::kTanh;
    double dropout_rate = 0.1;
    std::uint64_t seed = 0;

    void validate() const {
        check(input_dim >= 1, "input_dim must be >= 1");
        for (auto h : hidden_dims) check(h >= 1, "hidden dims must be >= 1");
        check(feature_dim >= 1, "feature_dim must be >= 1");
        check(num_classes >= 2, "num_classes must be >= 2");
        check(dropout_rate >= 0.0 && dropout_rate < 1.0, "dropout_rate must be in [0, 1)");
    }
};

struct TrainConfig {
    std::uint32_t epochs = 10;
    std::uint32_t batch_size = 32;
    double max_learning_rate = 1e-3;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        check(epochs >= 1, "epochs must be >= 1");
        check(batch_size >= 1, "batch_size must be >= 1");
        check(max_learning_rate > 0.0, "max_learning_rate must be > 0");
        check(weight_decay >= 0.0, "weight_decay must be >= 0");
    }
};

}  // namespace fgb::nn
