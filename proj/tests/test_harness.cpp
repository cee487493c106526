#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "fgb/common.hpp"
#include "fgb/data/dataset.hpp"
#include "fgb/data/synthetic.hpp"
#include "fgb/eval/harness.hpp"
#include "fgb/eval/report.hpp"

using fgb::Matrix;
using fgb::Rng;
using namespace fgb::eval;
namespace data = fgb::data;

namespace {

// Labels round-robin so every class reaches every split; features are
// class-dependent blob centers plus noise.
data::TaskDataset blob_task(const std::string& id, std::size_t n_train, std::size_t n_dev,
                            std::size_t n_test, int classes, std::size_t dim,
                            std::uint64_t seed) {
    Rng rng(seed);
    auto fill = [&](data::SplitData& split, std::size_t n) {
        split.x = Matrix(n, dim);
        split.y.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const int c = static_cast<int>(i) % classes;
            split.y[i] = c;
            for (std::size_t j = 0; j < dim; ++j) {
                const double center =
                    static_cast<int>(j) % classes == c ? 1.6 : -0.8;
                split.x(i, j) = center + 0.6 * rng.gaussian();
            }
        }
    };
    data::TaskDataset task;
    task.task_id = id;
    task.num_classes = static_cast<std::uint32_t>(classes);
    fill(task.train, n_train);
    fill(task.dev, n_dev);
    fill(task.test, n_test);
    task.validate();
    return task;
}

PipelineConfig tiny_config() {
    PipelineConfig config;
    config.encoder.hidden_dims = {8};
    config.encoder.feature_dim = 5;
    config.encoder.dropout_rate = 0.1;
    config.fine_tune.epochs = 3;
    config.fine_tune.batch_size = 16;
    config.fine_tune.max_learning_rate = 1e-2;
    config.pretrain = config.fine_tune;
    config.gbdt.max_leaves = 4;
    config.gbdt.max_bins = 32;
    config.gbdt.min_samples_leaf = 5;
    config.round_candidates = {1, 5};
    return config;
}

bool same_except_wall(const SeedResult& a, const SeedResult& b) {
    bool same = a.task_id == b.task_id && a.seed == b.seed && a.failed == b.failed &&
                a.error == b.error && a.instrumentation == b.instrumentation &&
                a.during_records == b.during_records && a.post_records == b.post_records &&
                a.encoder_hash == b.encoder_hash &&
                a.fine_tune_losses == b.fine_tune_losses;
    for (HeadKind kind : kAllHeadKinds) {
        const HeadOutcome& ha = a.head(kind);
        const HeadOutcome& hb = b.head(kind);
        same = same && ha.present == hb.present && ha.dev_accuracy == hb.dev_accuracy &&
               ha.test_accuracy == hb.test_accuracy &&
               ha.boosting_rounds == hb.boosting_rounds;
    }
    return same;
}

// Drop the trailing wall_seconds column from every results line.
std::string strip_wall_column(const std::string& csv) {
    std::string out;
    std::string line;
    for (char c : csv) {
        if (c != '\n') {
            line += c;
            continue;
        }
        const std::size_t cut = line.rfind(',');
        out += line.substr(0, cut);
        out += '\n';
        line.clear();
    }
    return out;
}

}  // namespace

TEST_CASE("run_pipeline free-ness and store cardinality") {
    const auto task = blob_task("blob", 60, 20, 20, 3, 6, 11);
    const auto config = tiny_config();

    HeadSet mlp_only{true, false, false};
    HeadSet mlp_free{true, false, true};
    SeedResult base = run_pipeline(task, 5, config, mlp_only);
    SeedResult with_free = run_pipeline(task, 5, config, mlp_free);
    SeedResult full = run_pipeline(task, 5, config);

    // The free head adds zero encoder forward passes; the standard head
    // adds exactly one pass over the train split.
    CHECK(base.instrumentation == with_free.instrumentation);
    CHECK(full.instrumentation.forward_calls == base.instrumentation.forward_calls + 1);
    CHECK(full.instrumentation.forward_rows ==
          base.instrumentation.forward_rows + task.train.size());

    CHECK(full.during_records == task.train.size() * config.fine_tune.epochs);
    CHECK(full.post_records == task.train.size());
    CHECK(with_free.post_records == 0);
    CHECK(full.fine_tune_losses.size() == config.fine_tune.epochs);
    CHECK(full.encoder_hash == with_free.encoder_hash);

    for (HeadKind kind : kAllHeadKinds) {
        const HeadOutcome& out = full.head(kind);
        REQUIRE(out.present);
        CHECK(out.dev_accuracy >= 0.0);
        CHECK(out.dev_accuracy <= 1.0);
        CHECK(out.test_accuracy >= 0.0);
        CHECK(out.test_accuracy <= 1.0);
        if (kind == HeadKind::kMlp) {
            CHECK(out.boosting_rounds == 0);
        } else {
            CHECK((out.boosting_rounds == 1 || out.boosting_rounds == 5));
        }
    }

    CHECK_FALSE(with_free.head(HeadKind::kStandardGbdt).present);
    CHECK_THROWS_AS(run_pipeline(task, 5, config, HeadSet{false, false, false}),
                    fgb::Error);
}

TEST_CASE("run_pipeline is deterministic up to wall time") {
    const auto task = blob_task("blob", 48, 16, 16, 2, 5, 3);
    const auto config = tiny_config();
    SeedResult a = run_pipeline(task, 9, config);
    SeedResult b = run_pipeline(task, 9, config);
    CHECK(same_except_wall(a, b));

    SeedResult other_seed = run_pipeline(task, 10, config);
    CHECK(a.encoder_hash != other_seed.encoder_hash);
}

TEST_CASE("compare_heads smallest sweep and aggregation consistency") {
    const std::vector<data::TaskDataset> tasks = {blob_task("blob", 60, 24, 24, 3, 6, 21)};
    const std::vector<std::uint64_t> seeds = {1, 2};
    const auto config = tiny_config();

    ComparisonReport report = compare_heads(tasks, nullptr, seeds, config);
    CHECK(report.failures == 0);
    REQUIRE(report.results.size() == 2);
    REQUIRE(report.aggregates.size() == 3);
    CHECK(report.paired_diffs.size() == 2);

    for (const TaskHeadAggregate& agg : report.aggregates) {
        CHECK(agg.successes == 2);
        CHECK(agg.failures == 0);
        REQUIRE(agg.dev_values.size() == 2);
        // Report means must be recomputable from the per-seed values.
        CHECK(agg.dev.mean == mean_std(agg.dev_values).mean);
        CHECK(agg.dev.stddev == mean_std(agg.dev_values).stddev);
        CHECK(agg.test.mean == mean_std(agg.test_values).mean);
        for (std::size_t s = 0; s < 2; ++s) {
            const SeedResult& r = report.results[s];
            CHECK(agg.dev_values[s] == r.head(agg.head).dev_accuracy);
        }
    }

    for (std::size_t s = 0; s < 2; ++s) {
        const SeedResult& r = report.results[s];
        CHECK(report.paired_diffs[s] == r.head(HeadKind::kFreeGbdt).dev_accuracy -
                                            r.head(HeadKind::kMlp).dev_accuracy);
    }

    REQUIRE(report.wins.size() == 3);
    for (const PairWins& w : report.wins) {
        CHECK(w.task_wins + w.task_losses + w.task_ties == 1);
        CHECK(w.seed_wins + w.seed_losses + w.seed_ties == 2);
    }

    CHECK(report.wilcoxon_paired.population == "paired_diffs");
    CHECK(report.wilcoxon_task_means.population == "task_means");
    if (report.wilcoxon_paired.valid)
        CHECK(report.wilcoxon_paired.result.n_effective <= 2);

    CHECK_THROWS_AS(compare_heads(tasks, nullptr, {7}, config), fgb::Error);
    CHECK_THROWS_AS(compare_heads({}, nullptr, seeds, config), fgb::Error);
}

TEST_CASE("compare_heads reruns render identical reports, any worker count") {
    const std::vector<data::TaskDataset> tasks = {
        blob_task("alpha", 40, 16, 16, 2, 5, 31), blob_task("beta", 45, 15, 15, 3, 5, 32)};
    const std::vector<std::uint64_t> seeds = {3, 4, 5};
    const auto config = tiny_config();

    ComparisonReport serial = compare_heads(tasks, nullptr, seeds, config, {}, 1);
    ComparisonReport threaded = compare_heads(tasks, nullptr, seeds, config, {}, 2);
    ComparisonReport rerun = compare_heads(tasks, nullptr, seeds, config, {}, 2);

    const std::string report_csv = render_report_csv(serial);
    CHECK(report_csv == render_report_csv(threaded));
    CHECK(report_csv == render_report_csv(rerun));
    CHECK(strip_wall_column(render_results_csv(serial)) ==
          strip_wall_column(render_results_csv(threaded)));
    CHECK(strip_wall_column(render_results_csv(threaded)) ==
          strip_wall_column(render_results_csv(rerun)));

    REQUIRE(serial.results.size() == 6);
    for (std::size_t i = 0; i < 6; ++i)
        CHECK(same_except_wall(serial.results[i], threaded.results[i]));
}

TEST_CASE("failed cells are marked, excluded, and reported") {
    // beta's width clashes with the parent-pretrained encoder, so its
    // cells fail while alpha's succeed.
    const auto parent = blob_task("parent", 60, 20, 20, 3, 6, 41);
    const std::vector<data::TaskDataset> tasks = {blob_task("alpha", 40, 16, 16, 2, 6, 42),
                                                  blob_task("beta", 40, 16, 16, 2, 7, 43)};
    const std::vector<std::uint64_t> seeds = {1, 2};
    auto config = tiny_config();
    config.pretrain.epochs = 1;

    ComparisonReport report = compare_heads(tasks, &parent, seeds, config);
    CHECK(report.failures == 2);

    for (const SeedResult& r : report.results) {
        if (r.task_id == "beta") {
            CHECK(r.failed);
            CHECK(r.error.find("does not fit") != std::string::npos);
        } else {
            CHECK_FALSE(r.failed);
        }
    }
    for (const TaskHeadAggregate& agg : report.aggregates) {
        if (agg.task_id == "beta") {
            CHECK(agg.successes == 0);
            CHECK(agg.failures == 2);
        } else {
            CHECK(agg.successes == 2);
        }
    }
    // Only alpha contributes paired differences.
    CHECK(report.paired_diffs.size() == 2);

    const std::string results_csv = render_results_csv(report);
    CHECK(results_csv.find("beta") == std::string::npos);
    const std::string report_csv = render_report_csv(report);
    CHECK(report_csv.find("# failures") != std::string::npos);
    CHECK(report_csv.find("does not fit") != std::string::npos);
    for (const PairWins& w : report.wins)
        CHECK(w.task_wins + w.task_losses + w.task_ties == 1);
}

TEST_CASE("training divergence fails every cell but still renders") {
    const std::vector<data::TaskDataset> tasks = {blob_task("blob", 40, 16, 16, 2, 5, 51)};
    auto config = tiny_config();
    config.encoder.activation = fgb::nn::Activation::kRelu;
    config.fine_tune.max_learning_rate = 1e150;

    ComparisonReport report = compare_heads(tasks, nullptr, {1, 2}, config);
    CHECK(report.failures == 2);
    for (const SeedResult& r : report.results) {
        REQUIRE(r.failed);
        CHECK(r.error.find("training diverged") != std::string::npos);
    }
    CHECK(report.paired_diffs.empty());
    CHECK_FALSE(report.wilcoxon_paired.valid);
    CHECK(report.wilcoxon_paired.note.find("no nonzero differences") != std::string::npos);

    const std::string report_csv = render_report_csv(report);
    CHECK(report_csv.find("# failures") != std::string::npos);
    CHECK(render_results_csv(report) == std::string(kResultsHeader) + "\n");
}

TEST_CASE("epoch curve shape and sample growth") {
    const auto task = blob_task("blob", 50, 20, 20, 2, 5, 61);
    auto config = tiny_config();
    config.fine_tune.epochs = 4;
    config.gbdt.boosting_rounds = 5;
    config.round_candidates = {5};

    const auto curve = epoch_curve(task, 17, config);
    REQUIRE(curve.size() == 4);
    for (std::size_t e = 0; e < curve.size(); ++e) {
        const EpochCurvePoint& pt = curve[e];
        CHECK(pt.epoch == e + 1);
        CHECK(pt.standard_samples == task.train.size());
        CHECK(pt.free_samples == task.train.size() * (e + 1));
        CHECK(std::isfinite(pt.train_loss));
        for (double acc : {pt.mlp_dev_accuracy, pt.standard_dev_accuracy,
                           pt.free_dev_accuracy}) {
            CHECK(acc >= 0.0);
            CHECK(acc <= 1.0);
        }
    }
    CHECK(curve.front().free_samples == curve.front().standard_samples);

    // The curve's bookkeeping must not disturb the underlying trajectory:
    // its final epoch matches a plain pipeline run at the same config.
    SeedResult pipeline = run_pipeline(task, 17, config);
    CHECK(curve.back().mlp_dev_accuracy == pipeline.head(HeadKind::kMlp).dev_accuracy);
    CHECK(curve.back().free_dev_accuracy ==
          pipeline.head(HeadKind::kFreeGbdt).dev_accuracy);
    CHECK(curve.back().standard_dev_accuracy ==
          pipeline.head(HeadKind::kStandardGbdt).dev_accuracy);
    CHECK(curve.back().train_loss == pipeline.fine_tune_losses.back());
}

TEST_CASE("feature trace rows and guards") {
    const auto task = blob_task("blob", 30, 10, 10, 2, 5, 71);
    auto config = tiny_config();
    config.fine_tune.epochs = 2;

    fgb::nn::EncoderConfig ecfg = config.encoder;
    ecfg.input_dim = static_cast<std::uint32_t>(task.input_dim());
    ecfg.num_classes = task.num_classes;
    ecfg.seed = 1;
    fgb::nn::ModelState state = fgb::nn::init_model(ecfg);
    fgb::head::FeatureStore during;
    fgb::head::fine_tune_accumulate(state, task.train.x, task.train.y, config.fine_tune,
                                    &during);
    fgb::head::FeatureStore post =
        fgb::head::extract_features_post(state, task.train.x, task.train.y);

    const auto rows = feature_trace(during, post, 2);
    REQUIRE(rows.size() == during.records.size() + post.records.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const bool in_during = i < during.records.size();
        CHECK(rows[i].source == (in_during ? "during_training" : "post_training"));
        if (!in_during) {
            CHECK(rows[i].epoch == 0);
            CHECK(rows[i].step == 0);
        }
    }
    CHECK(rows[0].value == static_cast<double>(during.records[0].feature[2]));

    CHECK_THROWS_AS(feature_trace(during, post, 5), fgb::Error);
    CHECK_THROWS_AS(feature_trace(post, during, 0), fgb::Error);
    fgb::head::FeatureStore narrow = post;
    narrow.feature_dim = 4;
    CHECK_THROWS_AS(feature_trace(during, narrow, 0), fgb::Error);
}

TEST_CASE("zero-weight encoder traces constant features") {
    const auto task = blob_task("blob", 20, 8, 8, 2, 4, 81);
    fgb::nn::EncoderConfig ecfg;
    ecfg.input_dim = 4;
    ecfg.hidden_dims = {6};
    ecfg.feature_dim = 3;
    ecfg.num_classes = 2;
    ecfg.seed = 2;
    fgb::nn::ModelState state = fgb::nn::init_model(ecfg);
    // With every weight at zero the encoder gets no gradient, so features
    // stay identically zero through training.
    for (double& p : state.params) p = 0.0;

    fgb::nn::TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 8;
    tc.max_learning_rate = 1e-2;
    fgb::head::FeatureStore during;
    fgb::head::fine_tune_accumulate(state, task.train.x, task.train.y, tc, &during);
    fgb::head::FeatureStore post =
        fgb::head::extract_features_post(state, task.train.x, task.train.y);

    const auto rows = feature_trace(during, post, 0);
    for (const TraceRow& row : rows) CHECK(row.value == 0.0);
}

TEST_CASE("during-training features drift toward the post-training ones") {
    const auto task = blob_task("blob", 80, 20, 20, 3, 6, 91);
    fgb::nn::EncoderConfig ecfg;
    ecfg.input_dim = 6;
    ecfg.hidden_dims = {10};
    ecfg.feature_dim = 8;
    ecfg.num_classes = 3;
    ecfg.dropout_rate = 0.0;
    ecfg.seed = 5;
    fgb::nn::ModelState state = fgb::nn::init_model(ecfg);
    fgb::nn::TrainConfig tc;
    tc.epochs = 5;
    tc.batch_size = 16;
    tc.max_learning_rate = 2e-2;
    fgb::head::FeatureStore during;
    fgb::head::fine_tune_accumulate(state, task.train.x, task.train.y, tc, &during);
    fgb::head::FeatureStore post =
        fgb::head::extract_features_post(state, task.train.x, task.train.y);

    CHECK(drift_fraction(during, post) > 0.5);

    CHECK_THROWS_AS(drift_fraction(post, during), fgb::Error);
    fgb::head::FeatureStore single;
    single.source = fgb::head::StoreSource::kDuringTraining;
    single.feature_dim = post.feature_dim;
    single.num_classes = post.num_classes;
    for (const auto& rec : during.records) {
        if (rec.epoch != 1) continue;
        single.records.push_back(rec);
    }
    CHECK_THROWS_AS(drift_fraction(single, post), fgb::Error);
}

TEST_CASE("parent pretraining transfers to the children") {
    const auto spec = fgb::data::default_suite_spec(0);
    const auto suite = fgb::data::generate_synthetic_suite(spec);

    PipelineConfig config;
    config.encoder.hidden_dims = {64};
    config.encoder.feature_dim = 32;
    config.fine_tune.epochs = 1;
    config.pretrain.epochs = 2;

    // Paired warm-vs-cold epoch-1 dev accuracy, averaged over the suite.
    const HeadSet mlp_only{true, false, false};
    double gain = 0.0;
    int wins = 0;
    const std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    for (std::uint64_t seed : seeds) {
        PretrainedEncoder pre = pretrain_parent_encoder(suite.parent, seed, config);
        double warm = 0.0, cold = 0.0;
        for (const data::TaskDataset& child : suite.children) {
            warm += run_pipeline(child, seed, config, mlp_only, &pre)
                        .head(HeadKind::kMlp)
                        .dev_accuracy;
            cold += run_pipeline(child, seed, config, mlp_only)
                        .head(HeadKind::kMlp)
                        .dev_accuracy;
        }
        gain += warm - cold;
        if (warm > cold) ++wins;
    }
    CHECK(gain / static_cast<double>(3 * seeds.size()) > 0.0);
    CHECK(wins >= 3);
}

TEST_CASE("pretrained encoder checkpoint is shareable and task-keyed") {
    const auto parent = blob_task("parent", 60, 20, 20, 3, 6, 95);
    const auto child_a = blob_task("a", 30, 10, 10, 2, 6, 96);
    const auto child_b = blob_task("b", 30, 10, 10, 2, 6, 97);
    auto config = tiny_config();
    config.pretrain.epochs = 1;

    PretrainedEncoder pre = pretrain_parent_encoder(parent, 4, config);
    PretrainedEncoder again = pretrain_parent_encoder(parent, 4, config);
    CHECK(pre.encoder_params == again.encoder_params);
    CHECK(pre.rng_state == again.rng_state);

    fgb::nn::ModelState state_a = make_task_state(child_a, 4, config, &pre);
    fgb::nn::ModelState state_b = make_task_state(child_b, 4, config, &pre);
    const auto layout = fgb::nn::detail::layer_layout(state_a.config);
    const std::size_t prefix = layout.back().w_off;
    REQUIRE(pre.encoder_params.size() == prefix);
    for (std::size_t i = 0; i < prefix; ++i) {
        CHECK(state_a.params[i] == pre.encoder_params[i]);
        CHECK(state_b.params[i] == pre.encoder_params[i]);
    }
    // Same encoder, different head draw per task id.
    bool head_differs = false;
    for (std::size_t i = prefix; i < state_a.params.size(); ++i)
        head_differs = head_differs || state_a.params[i] != state_b.params[i];
    CHECK(head_differs);
}

TEST_CASE("results csv round trip and paired diff extraction") {
    const std::vector<data::TaskDataset> tasks = {blob_task("blob", 40, 16, 16, 2, 5, 99)};
    const std::vector<std::uint64_t> seeds = {1, 2, 3};
    const auto config = tiny_config();
    ComparisonReport report = compare_heads(tasks, nullptr, seeds, config);

    const std::string path = "harness_results_tmp.csv";
    write_results_csv(path, report);
    const auto rows = read_results_csv(path);
    REQUIRE(rows.size() == 9);
    CHECK(rows[0].task_id == "blob");
    CHECK(rows[0].head == "mlp");
    CHECK(rows[1].head == "standard_gbdt");
    CHECK(rows[2].head == "free_gbdt");
    CHECK(rows[0].dev_accuracy ==
          report.results[0].head(HeadKind::kMlp).dev_accuracy);

    const auto diffs = paired_diffs_from_results(rows, "free_gbdt", "mlp");
    REQUIRE(diffs.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(diffs[i] == report.paired_diffs[i]);

    CHECK_THROWS_AS(paired_diffs_from_results(rows, "mlp", "mlp"), fgb::Error);
    CHECK_THROWS_AS(paired_diffs_from_results(rows, "mlp", "gbdt"), fgb::Error);
    std::remove(path.c_str());
}

TEST_CASE("head names round trip") {
    for (HeadKind kind : kAllHeadKinds) CHECK(parse_head_name(head_name(kind)) == kind);
    CHECK_THROWS_AS(parse_head_name("gbdt"), fgb::Error);
    CHECK(HeadSet{}.size() == 3);
    CHECK((HeadSet{true, false, false}.size()) == 1);
}
