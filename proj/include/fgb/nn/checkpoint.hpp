#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fgb/common.hpp"
#include "fgb/nn/config.hpp"
#include "fgb/nn/model.hpp"

namespace fgb::nn {

constexpr std::uint32_t kCheckpointFormatVersion = 1;

inline std::vector<std::uint8_t> serialize_checkpoint(const ModelState& state) {
    ByteWriter w;
    w.magic("FGNN");
    w.u32(kCheckpointFormatVersion);
    const EncoderConfig& c = state.config;
    w.u32(c.input_dim);
    w.u32(static_cast<std::uint32_t>(c.hidden_dims.size()));
    for (auto h : c.hidden_dims) w.u32(h);
    w.u32(c.feature_dim);
    w.u32(c.num_classes);
    w.u32(static_cast<std::uint32_t>(c.activation));
    w.f64(c.dropout_rate);
    w.u64(c.seed);
    auto tensor = [&w](const std::vector<double>& v) {
        w.u64(v.size());
        for (double x : v) w.f64(x);
    };
    tensor(state.params);
    tensor(state.adam_m);
    tensor(state.adam_v);
    w.u64(state.adam_step);
    w.u64(state.rng.state());
    return w.bytes();
}

inline ModelState deserialize_checkpoint(ByteReader& r) {
    r.expect_magic("FGNN", "checkpoint");
    std::uint32_t version = r.u32();
    check(version == kCheckpointFormatVersion,
          "checkpoint: unsupported format version " + std::to_string(version));
    ModelState state;
    EncoderConfig& c = state.config;
    c.input_dim = r.u32();
    c.hidden_dims.resize(r.u32());
    for (auto& h : c.hidden_dims) h = r.u32();
    c.feature_dim = r.u32();
    c.num_classes = r.u32();
    std::uint32_t act = r.u32();
    check(act <= 1, "checkpoint: bad activation tag");
    c.activation = static_cast<Activation>(act);
    c.dropout_rate = r.f64();
    c.seed = r.u64();
    c.validate();
    auto tensor = [&r](std::vector<double>& v) {
        v.resize(r.u64());
        for (double& x : v) x = r.f64();
    };
    tensor(state.params);
    tensor(state.adam_m);
    tensor(state.adam_v);
    const std::size_t expected = detail::param_count(c);
    check(state.params.size() == expected && state.adam_m.size() == expected &&
              state.adam_v.size() == expected,
          "checkpoint: tensor sizes inconsistent with config");
    state.adam_step = r.u64();
    state.rng.set_state(r.u64());
    check(r.exhausted(), "checkpoint: trailing bytes");
    return state;
}

inline void save_checkpoint(const ModelState& state, const std::string& path) {
    auto bytes = serialize_checkpoint(state);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    check(out.good(), "cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    check(out.good(), "short write: " + path);
}

inline ModelState load_checkpoint(const std::string& path) {
    ByteReader r = ByteReader::from_file(path);
    return deserialize_checkpoint(r);
}

// Content hash used to assert that two heads were built from the same
// fine-tuned encoder state.
inline std::uint64_t checkpoint_hash(const ModelState& state) {
    return fnv1a64(serialize_checkpoint(state));
}

}  // namespace fgb::nn
