#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "fgb/common.hpp"
#include "fgb/data/dataset.hpp"
#include "fgb/eval/metrics.hpp"
#include "fgb/eval/wilcoxon.hpp"
#include "fgb/gbdt/ensemble.hpp"
#include "fgb/head/pipeline.hpp"
#include "fgb/nn/checkpoint.hpp"
#include "fgb/nn/model.hpp"
#include "fgb/nn/train.hpp"

namespace fgb::eval {

enum class HeadKind : int { kMlp = 0, kStandardGbdt = 1, kFreeGbdt = 2 };

constexpr HeadKind kAllHeadKinds[] = {HeadKind::kMlp, HeadKind::kStandardGbdt,
                                      HeadKind::kFreeGbdt};

inline const char* head_name(HeadKind kind) {
    switch (kind) {
        case HeadKind::kMlp: return "mlp";
        case HeadKind::kStandardGbdt: return "standard_gbdt";
        case HeadKind::kFreeGbdt: return "free_gbdt";
    }
    throw Error("head_name: bad head kind");
}

inline HeadKind parse_head_name(const std::string& name) {
    for (HeadKind kind : kAllHeadKinds)
        if (name == head_name(kind)) return kind;
    throw Error("unknown head '" + name + "' (expected mlp, standard_gbdt, free_gbdt)");
}

struct HeadSet {
    bool mlp = true;
    bool standard_gbdt = true;
    bool free_gbdt = true;

    bool contains(HeadKind kind) const {
        switch (kind) {
            case HeadKind::kMlp: return mlp;
            case HeadKind::kStandardGbdt: return standard_gbdt;
            case HeadKind::kFreeGbdt: return free_gbdt;
        }
        return false;
    }
    std::size_t size() const {
        return (mlp ? 1u : 0u) + (standard_gbdt ? 1u : 0u) + (free_gbdt ? 1u : 0u);
    }
};

// Everything one (task, seed) run needs. encoder.input_dim, num_classes and
// seed are overwritten per run from the task and the sweep seed.
struct PipelineConfig {
    nn::EncoderConfig encoder;
    nn::TrainConfig fine_tune;
    nn::TrainConfig pretrain;
    bool use_pretraining = true;  // effective only when a parent task is supplied
    gbdt::GbdtParams gbdt;
    std::vector<std::uint32_t> round_candidates = {1, 10, 20, 30, 40};

    PipelineConfig() {
        fine_tune.max_learning_rate = 1e-2;  // hotter than the library default: the head restarts random
        pretrain.epochs = 3;
    }

    void validate() const {
        check(fine_tune.epochs >= 1, "pipeline config: fine_tune.epochs must be >= 1");
        check(!round_candidates.empty(), "pipeline config: empty round candidates");
    }
};

// The per-seed shared artifact: encoder weights after intermediate
// pretraining on the parent task, plus the rng point reached, so every
// child task of the same seed fine-tunes from one checkpoint.
struct PretrainedEncoder {
    std::vector<double> encoder_params;
    std::uint64_t rng_state = 0;
};

inline PretrainedEncoder pretrain_parent_encoder(const data::TaskDataset& parent,
                                                 std::uint64_t seed,
                                                 const PipelineConfig& config) {
    parent.validate();
    nn::EncoderConfig cfg = config.encoder;
    cfg.input_dim = static_cast<std::uint32_t>(parent.input_dim());
    cfg.num_classes = parent.num_classes;
    cfg.seed = seed;
    nn::ModelState state = nn::init_model(cfg);
    nn::train_loop(state, parent.train.x, parent.train.y, config.pretrain);
    const auto layout = nn::detail::layer_layout(cfg);
    PretrainedEncoder out;
    out.encoder_params.assign(state.params.begin(),
                              state.params.begin() +
                                  static_cast<std::ptrdiff_t>(layout.back().w_off));
    out.rng_state = state.rng.state();
    return out;
}

// Fresh model for a task; with a pretrained encoder the head is drawn from
// an rng derived from the checkpoint and the task id, so runs stay
// deterministic per (seed, task) regardless of sweep composition.
inline nn::ModelState make_task_state(const data::TaskDataset& task, std::uint64_t seed,
                                      const PipelineConfig& config,
                                      const PretrainedEncoder* pretrained) {
    nn::EncoderConfig cfg = config.encoder;
    cfg.input_dim = static_cast<std::uint32_t>(task.input_dim());
    cfg.num_classes = task.num_classes;
    cfg.seed = seed;
    nn::ModelState state = nn::init_model(cfg);
    if (pretrained) {
        const auto layout = nn::detail::layer_layout(cfg);
        const std::size_t prefix = layout.back().w_off;
        check(pretrained->encoder_params.size() == prefix,
              "pretrained encoder does not fit this model configuration");
        std::copy(pretrained->encoder_params.begin(), pretrained->encoder_params.end(),
                  state.params.begin());
        Rng rng(pretrained->rng_state ^ fnv1a64(task.task_id));
        const auto& head = layout.back();
        nn::detail::init_layer(rng, state.params.data() + head.w_off,
                               state.params.data() + head.b_off, head.in, head.out);
        state.rng = rng;
    }
    return state;
}

struct HeadOutcome {
    bool present = false;
    double dev_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::uint32_t boosting_rounds = 0;  // 0 for the mlp head
    double wall_seconds = 0.0;
};

struct SeedResult {
    std::string task_id;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    HeadOutcome heads[3];
    head::RunInstrumentation instrumentation;
    std::uint64_t during_records = 0;
    std::uint64_t post_records = 0;
    std::uint64_t encoder_hash = 0;  // fine-tuned checkpoint; both GBDT heads share it
    std::vector<double> fine_tune_losses;

    const HeadOutcome& head(HeadKind kind) const {
        return heads[static_cast<int>(kind)];
    }
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

// Optional sink for the heavyweight products of a pipeline run, for callers
// that persist them (the CLI run command). Stores and ensembles for heads
// that did not run stay empty.
struct RunArtifacts {
    nn::ModelState state;  // fine-tuned checkpoint
    head::FeatureStore during;
    head::FeatureStore post;
    gbdt::Ensemble standard_head;
    gbdt::Ensemble free_head;
};

// One full experiment cell: fine-tune with accumulation, evaluate the three
// heads. The dev and test splits get exactly one eval-mode forward pass
// each, shared between the MLP logits and the GBDT feature inputs, so
// adding the free head to a sweep never adds encoder work.
inline SeedResult run_pipeline(const data::TaskDataset& task, std::uint64_t seed,
                               const PipelineConfig& config, const HeadSet& heads = {},
                               const PretrainedEncoder* pretrained = nullptr,
                               RunArtifacts* artifacts = nullptr) {
    config.validate();
    task.validate();
    check(heads.size() >= 1, "run_pipeline: no heads selected");
    check(task.dev.size() >= 1 && task.test.size() >= 1,
          "run_pipeline: task needs nonempty dev and test splits");

    SeedResult result;
    result.task_id = task.task_id;
    result.seed = seed;

    const auto t0 = std::chrono::steady_clock::now();
    nn::ModelState state = make_task_state(task, seed, config, pretrained);
    head::FeatureStore during;
    result.fine_tune_losses =
        head::fine_tune_accumulate(state, task.train.x, task.train.y, config.fine_tune,
                                   &during, &result.instrumentation);
    result.during_records = during.records.size();

    nn::ForwardResult dev_out = nn::forward(state, task.dev.x, nn::Mode::kEval);
    result.instrumentation.count(task.dev.x.rows());
    nn::ForwardResult test_out = nn::forward(state, task.test.x, nn::Mode::kEval);
    result.instrumentation.count(task.test.x.rows());
    result.encoder_hash = nn::checkpoint_hash(state);
    const double session_seconds = detail::seconds_since(t0);

    if (heads.mlp) {
        HeadOutcome& out = result.heads[static_cast<int>(HeadKind::kMlp)];
        out.present = true;
        out.dev_accuracy = accuracy(gbdt::Ensemble::argmax_rows(dev_out.logits), task.dev.y);
        out.test_accuracy = accuracy(gbdt::Ensemble::argmax_rows(test_out.logits), task.test.y);
        out.wall_seconds = session_seconds;
    }
    if (heads.standard_gbdt) {
        const auto t1 = std::chrono::steady_clock::now();
        HeadOutcome& out = result.heads[static_cast<int>(HeadKind::kStandardGbdt)];
        head::FeatureStore post = head::extract_features_post(
            state, task.train.x, task.train.y, &result.instrumentation);
        result.post_records = post.records.size();
        check(nn::checkpoint_hash(state) == result.encoder_hash,
              "standard head: encoder state changed after fine-tuning");
        head::RoundsSelection sel = head::select_boosting_rounds(
            post, dev_out.features, task.dev.y, config.gbdt, config.round_candidates);
        out.present = true;
        out.dev_accuracy = sel.best_accuracy;
        out.test_accuracy =
            accuracy(sel.ensemble.predict_class(test_out.features), task.test.y);
        out.boosting_rounds = sel.best_rounds;
        out.wall_seconds = detail::seconds_since(t1);
        if (artifacts) {
            artifacts->post = std::move(post);
            artifacts->standard_head = std::move(sel.ensemble);
        }
    }
    if (heads.free_gbdt) {
        const auto t2 = std::chrono::steady_clock::now();
        HeadOutcome& out = result.heads[static_cast<int>(HeadKind::kFreeGbdt)];
        head::RoundsSelection sel = head::select_boosting_rounds(
            during, dev_out.features, task.dev.y, config.gbdt, config.round_candidates);
        out.present = true;
        out.dev_accuracy = sel.best_accuracy;
        out.test_accuracy =
            accuracy(sel.ensemble.predict_class(test_out.features), task.test.y);
        out.boosting_rounds = sel.best_rounds;
        out.wall_seconds = detail::seconds_since(t2);
        if (artifacts) artifacts->free_head = std::move(sel.ensemble);
    }
    if (artifacts) {
        artifacts->during = std::move(during);
        artifacts->state = std::move(state);
    }
    return result;
}

struct TaskHeadAggregate {
    std::string task_id;
    HeadKind head = HeadKind::kMlp;
    std::size_t successes = 0;
    std::size_t failures = 0;
    MeanStd dev;
    MeanStd test;
    std::vector<double> dev_values;  // per successful seed, sweep seed order
    std::vector<double> test_values;
};

struct PairWins {
    HeadKind a = HeadKind::kFreeGbdt;
    HeadKind b = HeadKind::kMlp;
    // task scope compares per-task dev means; seed scope compares each
    // successful (task, seed) run.
    std::size_t task_wins = 0, task_losses = 0, task_ties = 0;
    std::size_t seed_wins = 0, seed_losses = 0, seed_ties = 0;
};

struct WilcoxonBlock {
    std::string population;
    bool valid = false;
    WilcoxonResult result;
    std::string note;
};

struct ComparisonReport {
    std::vector<std::string> task_ids;
    std::vector<std::uint64_t> seeds;
    HeadSet heads;
    std::vector<SeedResult> results;  // task-major, seed-minor
    std::vector<TaskHeadAggregate> aggregates;
    std::vector<double> paired_diffs;  // free_gbdt - mlp dev accuracy, successes only
    WilcoxonBlock wilcoxon_paired;
    WilcoxonBlock wilcoxon_task_means;
    std::vector<PairWins> wins;
    std::size_t failures = 0;

    const TaskHeadAggregate* aggregate(const std::string& task_id, HeadKind head) const {
        for (const TaskHeadAggregate& a : aggregates)
            if (a.task_id == task_id && a.head == head) return &a;
        return nullptr;
    }
};

namespace detail {

template <typename Fn>
void run_indexed_jobs(std::size_t count, std::size_t workers, Fn&& fn) {
    if (count == 0) return;
    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                fn(i);
            }
        });
    }
    for (std::thread& t : pool) t.join();
}

inline WilcoxonBlock make_wilcoxon_block(const std::string& population,
                                         const std::vector<double>& diffs,
                                         const std::string& base_note) {
    WilcoxonBlock block;
    block.population = population;
    block.note = base_note;
    try {
        block.result = wilcoxon_signed_rank(diffs);
        block.valid = true;
    } catch (const Error& e) {
        block.valid = false;
        block.note = e.what();
    }
    return block;
}

}  // namespace detail

// The multi-seed sweep. Per seed: one shared pretrained encoder (when a
// parent is given); per (task, seed): one pipeline run in a worker slot.
// Aggregation happens after the join in fixed (task, seed) order, so the
// report is identical however the workers interleave. A failed run marks
// its cell, is excluded from every aggregate, and flips `failures`.
inline ComparisonReport compare_heads(const std::vector<data::TaskDataset>& tasks,
                                      const data::TaskDataset* parent,
                                      const std::vector<std::uint64_t>& seeds,
                                      const PipelineConfig& config,
                                      const HeadSet& heads = {},
                                      std::size_t workers = 1,
                                      const std::function<void(const SeedResult&)>& on_cell = {}) {
    config.validate();
    check(!tasks.empty(), "compare_heads: no tasks");
    check(seeds.size() >= 2, "compare_heads: need at least 2 seeds");
    check(heads.size() >= 1, "compare_heads: no heads selected");

    ComparisonReport report;
    report.seeds = seeds;
    report.heads = heads;
    for (const auto& t : tasks) report.task_ids.push_back(t.task_id);

    const bool pretraining =
        parent != nullptr && config.use_pretraining && config.pretrain.epochs >= 1;
    std::vector<PretrainedEncoder> pretrained(pretraining ? seeds.size() : 0);
    if (pretraining) {
        detail::run_indexed_jobs(seeds.size(), workers, [&](std::size_t i) {
            pretrained[i] = pretrain_parent_encoder(*parent, seeds[i], config);
        });
    }

    const std::size_t n_jobs = tasks.size() * seeds.size();
    report.results.resize(n_jobs);
    std::mutex cell_mutex;
    detail::run_indexed_jobs(n_jobs, workers, [&](std::size_t i) {
        const std::size_t t = i / seeds.size();
        const std::size_t s = i % seeds.size();
        SeedResult& cell = report.results[i];
        try {
            cell = run_pipeline(tasks[t], seeds[s], config, heads,
                                pretraining ? &pretrained[s] : nullptr);
        } catch (const std::exception& e) {
            cell = SeedResult{};
            cell.task_id = tasks[t].task_id;
            cell.seed = seeds[s];
            cell.failed = true;
            cell.error = e.what();
        }
        if (on_cell) {
            std::lock_guard<std::mutex> lock(cell_mutex);
            on_cell(cell);
        }
    });

    for (const SeedResult& r : report.results)
        if (r.failed) ++report.failures;

    for (std::size_t t = 0; t < tasks.size(); ++t) {
        for (HeadKind kind : kAllHeadKinds) {
            if (!heads.contains(kind)) continue;
            TaskHeadAggregate agg;
            agg.task_id = tasks[t].task_id;
            agg.head = kind;
            for (std::size_t s = 0; s < seeds.size(); ++s) {
                const SeedResult& r = report.results[t * seeds.size() + s];
                if (r.failed) {
                    ++agg.failures;
                    continue;
                }
                const HeadOutcome& out = r.head(kind);
                check(out.present, "compare_heads: missing head outcome");
                agg.dev_values.push_back(out.dev_accuracy);
                agg.test_values.push_back(out.test_accuracy);
            }
            agg.successes = agg.dev_values.size();
            if (agg.successes >= 1) {
                agg.dev = mean_std(agg.dev_values);
                agg.test = mean_std(agg.test_values);
            }
            report.aggregates.push_back(std::move(agg));
        }
    }

    if (heads.mlp && heads.free_gbdt) {
        for (const SeedResult& r : report.results) {
            if (r.failed) continue;
            report.paired_diffs.push_back(r.head(HeadKind::kFreeGbdt).dev_accuracy -
                                          r.head(HeadKind::kMlp).dev_accuracy);
        }
        report.wilcoxon_paired = detail::make_wilcoxon_block(
            "paired_diffs", report.paired_diffs,
            "free_gbdt minus mlp dev accuracy per (task; seed); zeros dropped "
            "(classic Wilcoxon; Pratt variant not used)");

        std::vector<double> task_mean_diffs;
        for (const auto& id : report.task_ids) {
            const TaskHeadAggregate* free_agg = report.aggregate(id, HeadKind::kFreeGbdt);
            const TaskHeadAggregate* mlp_agg = report.aggregate(id, HeadKind::kMlp);
            if (free_agg && mlp_agg && free_agg->successes > 0 && mlp_agg->successes > 0)
                task_mean_diffs.push_back(free_agg->dev.mean - mlp_agg->dev.mean);
        }
        report.wilcoxon_task_means = detail::make_wilcoxon_block(
            "task_means", task_mean_diffs,
            "per-task mean dev accuracy differences; alternative population "
            "for the same hypothesis");
    } else {
        report.wilcoxon_paired.population = "paired_diffs";
        report.wilcoxon_paired.note = "requires both mlp and free_gbdt heads";
        report.wilcoxon_task_means.population = "task_means";
        report.wilcoxon_task_means.note = "requires both mlp and free_gbdt heads";
    }

    const std::pair<HeadKind, HeadKind> pairs[] = {
        {HeadKind::kFreeGbdt, HeadKind::kMlp},
        {HeadKind::kFreeGbdt, HeadKind::kStandardGbdt},
        {HeadKind::kStandardGbdt, HeadKind::kMlp},
    };
    for (const auto& [a, b] : pairs) {
        if (!heads.contains(a) || !heads.contains(b)) continue;
        PairWins w;
        w.a = a;
        w.b = b;
        for (const auto& id : report.task_ids) {
            const TaskHeadAggregate* aa = report.aggregate(id, a);
            const TaskHeadAggregate* bb = report.aggregate(id, b);
            if (!aa || !bb || aa->successes == 0 || bb->successes == 0) continue;
            if (aa->dev.mean > bb->dev.mean)
                ++w.task_wins;
            else if (aa->dev.mean < bb->dev.mean)
                ++w.task_losses;
            else
                ++w.task_ties;
        }
        for (const SeedResult& r : report.results) {
            if (r.failed) continue;
            const double da = r.head(a).dev_accuracy;
            const double db = r.head(b).dev_accuracy;
            if (da > db)
                ++w.seed_wins;
            else if (da < db)
                ++w.seed_losses;
            else
                ++w.seed_ties;
        }
        report.wins.push_back(w);
    }
    return report;
}

// Figure-3 style analysis: pause after each epoch and score all three
// heads on dev. The standard head retrains on a fresh post-hoc extraction
// at the current parameters (N rows); the free head retrains on the store
// accumulated so far (N*e rows). Sample counts are read off the actual
// stores, not assumed.
struct EpochCurvePoint {
    std::uint32_t epoch = 0;
    double train_loss = 0.0;
    double mlp_dev_accuracy = 0.0;
    double standard_dev_accuracy = 0.0;
    double free_dev_accuracy = 0.0;
    std::uint64_t standard_samples = 0;
    std::uint64_t free_samples = 0;
};

inline std::vector<EpochCurvePoint> epoch_curve(const data::TaskDataset& task,
                                                std::uint64_t seed,
                                                const PipelineConfig& config,
                                                const PretrainedEncoder* pretrained =
                                                    nullptr) {
    config.validate();
    task.validate();
    check(task.dev.size() >= 1, "epoch_curve: task needs a dev split");

    nn::ModelState state = make_task_state(task, seed, config, pretrained);
    head::FeatureStore store;
    store.source = head::StoreSource::kDuringTraining;
    store.feature_dim = state.config.feature_dim;
    store.num_classes = state.config.num_classes;

    std::vector<EpochCurvePoint> curve;
    curve.reserve(config.fine_tune.epochs);

    nn::TrainHooks hooks;
    hooks.on_batch_features = head::detail::store_append_hook(&store, task.train.y);
    hooks.on_epoch_end = [&](std::uint32_t epoch, double mean_loss) {
        EpochCurvePoint pt;
        pt.epoch = epoch;
        pt.train_loss = mean_loss;

        nn::ForwardResult dev_out = nn::forward(state, task.dev.x, nn::Mode::kEval);
        pt.mlp_dev_accuracy = accuracy(gbdt::Ensemble::argmax_rows(dev_out.logits), task.dev.y);

        head::FeatureStore post =
            head::extract_features_post(state, task.train.x, task.train.y);
        pt.standard_samples = post.records.size();
        gbdt::Ensemble standard = head::train_standard_gbdt(post, config.gbdt);
        pt.standard_dev_accuracy =
            accuracy(standard.predict_class(dev_out.features), task.dev.y);

        pt.free_samples = store.records.size();
        gbdt::Ensemble free_head = head::train_free_gbdt(store, config.gbdt);
        pt.free_dev_accuracy =
            accuracy(free_head.predict_class(dev_out.features), task.dev.y);

        curve.push_back(pt);
    };
    nn::train_loop(state, task.train.x, task.train.y, config.fine_tune, hooks);
    return curve;
}

// Figure-4 style dump of one feature dimension: every during-training
// record followed by every post-training record.
struct TraceRow {
    std::string source;
    std::uint32_t epoch = 0;
    std::uint64_t step = 0;
    std::uint64_t sample_id = 0;
    double value = 0.0;
};

inline std::vector<TraceRow> feature_trace(const head::FeatureStore& during,
                                           const head::FeatureStore& post,
                                           std::uint32_t dimension) {
    check(during.source == head::StoreSource::kDuringTraining,
          "feature_trace: first store must be during_training");
    check(post.source == head::StoreSource::kPostTraining,
          "feature_trace: second store must be post_training");
    check(during.feature_dim == post.feature_dim,
          "feature_trace: stores disagree on feature_dim");
    check(dimension < during.feature_dim, "feature_trace: dimension " +
                                              std::to_string(dimension) +
                                              " out of range (feature_dim " +
                                              std::to_string(during.feature_dim) + ")");
    std::vector<TraceRow> rows;
    rows.reserve(during.records.size() + post.records.size());
    for (const head::FeatureStore* store : {&during, &post}) {
        for (const head::FeatureRecord& rec : store->records) {
            TraceRow row;
            row.source = head::store_source_name(store->source);
            row.epoch = rec.epoch;
            row.step = rec.step;
            row.sample_id = rec.sample_id;
            row.value = static_cast<double>(rec.feature[dimension]);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

// Drift statistic for the Figure-4 claim that during-training feature
// distributions approach the post-training one: the fraction of dimensions
// whose last-epoch mean is at least as close to the post-training mean as
// the first-epoch mean was.
inline double drift_fraction(const head::FeatureStore& during,
                             const head::FeatureStore& post) {
    check(during.source == head::StoreSource::kDuringTraining &&
              post.source == head::StoreSource::kPostTraining,
          "drift_fraction: want a during-training and a post-training store");
    check(during.feature_dim == post.feature_dim,
          "drift_fraction: stores disagree on feature_dim");
    check(!during.records.empty() && !post.records.empty(),
          "drift_fraction: empty store");
    std::uint32_t first_epoch = during.records.front().epoch;
    std::uint32_t last_epoch = first_epoch;
    for (const auto& rec : during.records) {
        first_epoch = std::min(first_epoch, rec.epoch);
        last_epoch = std::max(last_epoch, rec.epoch);
    }
    check(last_epoch > first_epoch, "drift_fraction: need at least two epochs");

    const std::uint32_t d = during.feature_dim;
    std::vector<double> first_mean(d, 0.0), last_mean(d, 0.0), post_mean(d, 0.0);
    std::size_t n_first = 0, n_last = 0;
    for (const auto& rec : during.records) {
        if (rec.epoch == first_epoch) {
            ++n_first;
            for (std::uint32_t j = 0; j < d; ++j)
                first_mean[j] += static_cast<double>(rec.feature[j]);
        }
        if (rec.epoch == last_epoch) {
            ++n_last;
            for (std::uint32_t j = 0; j < d; ++j)
                last_mean[j] += static_cast<double>(rec.feature[j]);
        }
    }
    for (const auto& rec : post.records)
        for (std::uint32_t j = 0; j < d; ++j)
            post_mean[j] += static_cast<double>(rec.feature[j]);
    std::size_t closer = 0;
    for (std::uint32_t j = 0; j < d; ++j) {
        const double f = first_mean[j] / static_cast<double>(n_first);
        const double l = last_mean[j] / static_cast<double>(n_last);
        const double p = post_mean[j] / static_cast<double>(post.records.size());
        if (std::abs(l - p) <= std::abs(f - p)) ++closer;
    }
    return static_cast<double>(closer) / static_cast<double>(d);
}

}  // namespace fgb::eval
