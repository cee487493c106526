#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fgb/common.hpp"

namespace fgb::head {

constexpr std::uint32_t kStoreFormatVersion = 1;

enum class StoreSource : std::uint32_t {
    kDuringTraining = 0,  // accumulated inside the fine-tuning loop
    kPostTraining = 1,    // extracted after fine-tuning in one eval pass
};

inline std::string store_source_name(StoreSource s) {
    return s == StoreSource::kDuringTraining ? "during_training" : "post_training";
}

// One logged forward pass of one training sample. epoch is 1-based for
// during-training records and 0 for post-training extraction; step is the
// global optimizer step whose forward produced the feature.
struct FeatureRecord {
    std::uint32_t epoch = 0;
    std::uint64_t step = 0;
    std::uint64_t sample_id = 0;
    std::uint32_t label = 0;
    std::vector<float> feature;

    bool operator==(const FeatureRecord&) const = default;
};

// Append-only ordered log of feature records; the GBDT heads consume it
// in exactly this order.
struct FeatureStore {
    StoreSource source = StoreSource::kDuringTraining;
    std::uint32_t feature_dim = 0;
    std::uint32_t num_classes = 0;
    std::vector<FeatureRecord> records;

    bool operator==(const FeatureStore&) const = default;

    void append(std::uint32_t epoch, std::uint64_t step, std::uint64_t sample_id,
                std::uint32_t label, const double* feature_row) {
        check(!records.empty() ? step >= records.back().step : true,
              "feature store: step must be nondecreasing");
        FeatureRecord rec;
        rec.epoch = epoch;
        rec.step = step;
        rec.sample_id = sample_id;
        rec.label = label;
        rec.feature.resize(feature_dim);
        for (std::uint32_t j = 0; j < feature_dim; ++j)
            rec.feature[j] = static_cast<float>(feature_row[j]);
        records.push_back(std::move(rec));
    }

    // Training view: features widened to doubles, labels as ints, row i =
    // record i.
    void to_matrix(Matrix* features, std::vector<int>* labels) const {
        *features = Matrix(records.size(), feature_dim);
        labels->resize(records.size());
        for (std::size_t i = 0; i < records.size(); ++i) {
            const FeatureRecord& rec = records[i];
            check(rec.feature.size() == feature_dim, "feature store: ragged record");
            for (std::uint32_t j = 0; j < feature_dim; ++j)
                (*features)(i, j) = static_cast<double>(rec.feature[j]);
            (*labels)[i] = static_cast<int>(rec.label);
        }
    }

    std::vector<std::uint8_t> serialize() const {
        ByteWriter w;
        w.magic("FGFS");
        w.u32(kStoreFormatVersion);
        w.u32(static_cast<std::uint32_t>(source));
        w.u32(feature_dim);
        w.u32(num_classes);
        w.u64(records.size());
        for (const FeatureRecord& rec : records) {
            check(rec.feature.size() == feature_dim, "feature store: ragged record");
            w.u32(rec.epoch);
            w.u64(rec.step);
            w.u64(rec.sample_id);
            w.u32(rec.label);
            for (float f : rec.feature) w.f32(f);
        }
        return w.bytes();
    }

    static FeatureStore deserialize(ByteReader& r) {
        FeatureStore store;
        r.expect_magic("FGFS", "feature store");
        std::uint32_t version = r.u32();
        check(version == kStoreFormatVersion,
              "feature store: unsupported format version " + std::to_string(version));
        std::uint32_t source_tag = r.u32();
        check(source_tag <= 1, "feature store: bad source tag");
        store.source = static_cast<StoreSource>(source_tag);
        store.feature_dim = r.u32();
        store.num_classes = r.u32();
        std::uint64_t count = r.u64();
        check(r.remaining() == count * (24 + 4ull * store.feature_dim),
              "feature store: record count disagrees with payload size");
        store.records.resize(count);
        for (FeatureRecord& rec : store.records) {
            rec.epoch = r.u32();
            rec.step = r.u64();
            rec.sample_id = r.u64();
            rec.label = r.u32();
            rec.feature.resize(store.feature_dim);
            for (float& f : rec.feature) f = r.f32();
        }
        return store;
    }

    void save(const std::string& path) const {
        auto bytes = serialize();
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        check(out.good(), "cannot open for writing: " + path);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        check(out.good(), "short write: " + path);
    }

    static FeatureStore load(const std::string& path) {
        ByteReader r = ByteReader::from_file(path);
        return deserialize(r);
    }
};

}  // namespace fgb::head
