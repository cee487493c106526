// fgb: batch experimentation over the three classification heads.
//
// Subcommands: gen-suite, run, compare, epochs-curve, trace, wilcoxon.
// Configuration comes from an optional JSON file (--config) overlaid with
// command-line flags; the fully resolved config is written into every
// output directory so any artifact can be reproduced from the file sitting
// next to it. Exit codes: 0 success, 1 usage/config error, 2 runtime
// failure.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fgb/common.hpp"
#include "fgb/data/dataset.hpp"
#include "fgb/data/synthetic.hpp"
#include "fgb/eval/harness.hpp"
#include "fgb/eval/report.hpp"
#include "fgb/gbdt/params.hpp"
#include "fgb/head/pipeline.hpp"
#include "fgb/nn/checkpoint.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

std::string objective_name(fgb::gbdt::Objective o) {
    switch (o) {
        case fgb::gbdt::Objective::kAuto: return "auto";
        case fgb::gbdt::Objective::kSoftmax: return "softmax";
        case fgb::gbdt::Objective::kLogistic: return "logistic";
    }
    throw fgb::Error("unknown objective enum value");
}

fgb::gbdt::Objective parse_objective(const std::string& name) {
    if (name == "auto") return fgb::gbdt::Objective::kAuto;
    if (name == "softmax") return fgb::gbdt::Objective::kSoftmax;
    if (name == "logistic") return fgb::gbdt::Objective::kLogistic;
    throw fgb::Error("unknown objective: " + name + " (expected auto, softmax or logistic)");
}

// Everything a command needs, resolved from defaults <- config file <- flags.
struct Experiment {
    std::string command;
    std::string suite_dir;
    std::string out_dir;
    std::string task;  // empty = first child task
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> heads = {"mlp", "standard_gbdt", "free_gbdt"};
    std::size_t workers = 1;
    bool overwrite = false;
    std::string wilcoxon_mode = "paired";  // or per-task-means
    std::uint32_t trace_dimension = 0;
    std::string results_path;  // wilcoxon input
    fgb::data::SyntheticSuiteSpec suite = fgb::data::default_suite_spec();
    fgb::eval::PipelineConfig pipeline;
};

std::vector<std::uint64_t> parse_u64_list(const std::string& text, const std::string& what) {
    std::vector<std::uint64_t> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        const std::string token = text.substr(pos, comma - pos);
        pos = comma + 1;
        if (token.empty()) throw fgb::Error(what + ": empty element in list '" + text + "'");
        const std::size_t dash = token.find('-');
        auto parse_one = [&](const std::string& t) {
            char* end = nullptr;
            const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
            if (end != t.c_str() + t.size() || t.empty())
                throw fgb::Error(what + ": bad number '" + t + "'");
            return static_cast<std::uint64_t>(v);
        };
        if (dash == std::string::npos) {
            out.push_back(parse_one(token));
        } else {
            const std::uint64_t lo = parse_one(token.substr(0, dash));
            const std::uint64_t hi = parse_one(token.substr(dash + 1));
            if (hi < lo) throw fgb::Error(what + ": descending range '" + token + "'");
            for (std::uint64_t v = lo; v <= hi; ++v) out.push_back(v);
        }
        if (comma == text.size()) break;
    }
    if (out.empty()) throw fgb::Error(what + ": empty list");
    return out;
}

std::vector<std::string> parse_name_list(const std::string& text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        const std::string token = text.substr(pos, comma - pos);
        if (!token.empty()) out.push_back(token);
        if (comma == text.size()) break;
        pos = comma + 1;
    }
    return out;
}

json train_to_json(const fgb::nn::TrainConfig& t) {
    return json{{"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"max_learning_rate", t.max_learning_rate},
                {"weight_decay", t.weight_decay}};
}

void train_from_json(const json& j, fgb::nn::TrainConfig* t) {
    t->epochs = j.value("epochs", t->epochs);
    t->batch_size = j.value("batch_size", t->batch_size);
    t->max_learning_rate = j.value("max_learning_rate", t->max_learning_rate);
    t->weight_decay = j.value("weight_decay", t->weight_decay);
}

json experiment_to_json(const Experiment& exp) {
    const auto& enc = exp.pipeline.encoder;
    const auto& g = exp.pipeline.gbdt;
    json j;
    j["command"] = exp.command;
    j["suite_dir"] = exp.suite_dir;
    j["out_dir"] = exp.out_dir;
    j["task"] = exp.task;
    j["seeds"] = exp.seeds;
    j["heads"] = exp.heads;
    j["rounds"] = exp.pipeline.round_candidates;
    j["workers"] = exp.workers;
    j["overwrite"] = exp.overwrite;
    j["use_pretraining"] = exp.pipeline.use_pretraining;
    j["wilcoxon"] = exp.wilcoxon_mode;
    j["trace_dimension"] = exp.trace_dimension;
    j["results"] = exp.results_path;
    j["suite"] = json{{"seed", exp.suite.seed},
                      {"center_separation", exp.suite.center_separation},
                      {"rotation_angle", exp.suite.rotation_angle}};
    j["encoder"] = json{{"hidden_dims", enc.hidden_dims},
                        {"feature_dim", enc.feature_dim},
                        {"activation", fgb::nn::activation_name(enc.activation)},
                        {"dropout_rate", enc.dropout_rate}};
    j["fine_tune"] = train_to_json(exp.pipeline.fine_tune);
    j["pretrain"] = train_to_json(exp.pipeline.pretrain);
    j["gbdt"] = json{{"learning_rate", g.learning_rate},
                     {"max_leaves", g.max_leaves},
                     {"boosting_rounds", g.boosting_rounds},
                     {"l2_lambda", g.l2_lambda},
                     {"min_samples_leaf", g.min_samples_leaf},
                     {"max_bins", g.max_bins},
                     {"objective", objective_name(g.objective)}};
    return j;
}

void experiment_from_json(const json& j, Experiment* exp) {
    exp->suite_dir = j.value("suite_dir", exp->suite_dir);
    exp->out_dir = j.value("out_dir", exp->out_dir);
    exp->task = j.value("task", exp->task);
    if (j.contains("seeds")) exp->seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("heads")) exp->heads = j.at("heads").get<std::vector<std::string>>();
    if (j.contains("rounds"))
        exp->pipeline.round_candidates = j.at("rounds").get<std::vector<std::uint32_t>>();
    exp->workers = j.value("workers", exp->workers);
    exp->overwrite = j.value("overwrite", exp->overwrite);
    exp->pipeline.use_pretraining = j.value("use_pretraining", exp->pipeline.use_pretraining);
    exp->wilcoxon_mode = j.value("wilcoxon", exp->wilcoxon_mode);
    exp->trace_dimension = j.value("trace_dimension", exp->trace_dimension);
    exp->results_path = j.value("results", exp->results_path);
    if (j.contains("suite")) {
        const json& s = j.at("suite");
        exp->suite.seed = s.value("seed", exp->suite.seed);
        exp->suite.center_separation =
            s.value("center_separation", exp->suite.center_separation);
        exp->suite.rotation_angle = s.value("rotation_angle", exp->suite.rotation_angle);
    }
    if (j.contains("encoder")) {
        const json& e = j.at("encoder");
        auto& enc = exp->pipeline.encoder;
        if (e.contains("hidden_dims"))
            enc.hidden_dims = e.at("hidden_dims").get<std::vector<std::uint32_t>>();
        enc.feature_dim = e.value("feature_dim", enc.feature_dim);
        if (e.contains("activation"))
            enc.activation = fgb::nn::parse_activation(e.at("activation").get<std::string>());
        enc.dropout_rate = e.value("dropout_rate", enc.dropout_rate);
    }
    if (j.contains("fine_tune")) train_from_json(j.at("fine_tune"), &exp->pipeline.fine_tune);
    if (j.contains("pretrain")) train_from_json(j.at("pretrain"), &exp->pipeline.pretrain);
    if (j.contains("gbdt")) {
        const json& g = j.at("gbdt");
        auto& p = exp->pipeline.gbdt;
        p.learning_rate = g.value("learning_rate", p.learning_rate);
        p.max_leaves = g.value("max_leaves", p.max_leaves);
        p.boosting_rounds = g.value("boosting_rounds", p.boosting_rounds);
        p.l2_lambda = g.value("l2_lambda", p.l2_lambda);
        p.min_samples_leaf = g.value("min_samples_leaf", p.min_samples_leaf);
        p.max_bins = g.value("max_bins", p.max_bins);
        if (g.contains("objective"))
            p.objective = parse_objective(g.at("objective").get<std::string>());
    }
}

// The flags CLI11 collects; only flags the user actually passed override the
// config file.
struct Flags {
    std::string config_path;
    std::string out_dir;
    std::string suite_dir;
    std::string task;
    std::string seeds;
    std::string heads;
    std::string rounds;
    std::string results_path;
    std::string wilcoxon_mode;
    std::size_t workers = 0;
    std::uint32_t trace_dimension = 0;
    std::uint64_t suite_seed = 0;
    bool overwrite = false;

    CLI::App* sub = nullptr;
    bool passed(const std::string& name) const {
        const CLI::Option* opt = sub->get_option_no_throw(name);
        return opt != nullptr && opt->count() > 0;
    }
};

void add_common_flags(CLI::App* sub, Flags* f) {
    f->sub = sub;
    sub->add_option("--config", f->config_path, "JSON config file; flags override its values");
    sub->add_option("--out", f->out_dir,
                    "output directory (default $FGB_OUT_ROOT/<command> or fgb-out/<command>)");
    sub->add_option("--seeds", f->seeds, "seed list, e.g. 1,2,7 or 1-20");
    sub->add_option("--heads", f->heads, "head list from mlp,standard_gbdt,free_gbdt");
    sub->add_option("--rounds", f->rounds, "boosting round candidates, e.g. 1,10,20,30,40");
    sub->add_option("--workers", f->workers, "parallel (task, seed) workers");
    sub->add_flag("--overwrite", f->overwrite, "allow writing into a nonempty output directory");
}

Experiment resolve(const Flags& flags, const std::string& command) {
    Experiment exp;
    exp.command = command;
    exp.seeds = command == "compare"
                    ? parse_u64_list("1-20", "seeds")
                    : std::vector<std::uint64_t>{1};
    if (!flags.config_path.empty()) {
        std::ifstream in(flags.config_path);
        fgb::check(in.good(), "cannot open config file: " + flags.config_path);
        experiment_from_json(json::parse(in), &exp);
    }
    if (flags.passed("--out")) exp.out_dir = flags.out_dir;
    if (flags.passed("--suite")) exp.suite_dir = flags.suite_dir;
    if (flags.passed("--task")) exp.task = flags.task;
    if (flags.passed("--seeds")) exp.seeds = parse_u64_list(flags.seeds, "seeds");
    if (flags.passed("--heads")) exp.heads = parse_name_list(flags.heads);
    if (flags.passed("--rounds")) {
        exp.pipeline.round_candidates.clear();
        for (std::uint64_t v : parse_u64_list(flags.rounds, "rounds"))
            exp.pipeline.round_candidates.push_back(static_cast<std::uint32_t>(v));
    }
    if (flags.passed("--workers")) exp.workers = flags.workers;
    if (flags.passed("--overwrite")) exp.overwrite = true;
    if (flags.passed("--wilcoxon")) exp.wilcoxon_mode = flags.wilcoxon_mode;
    if (flags.passed("--dimension")) exp.trace_dimension = flags.trace_dimension;
    if (flags.passed("--suite-seed")) exp.suite.seed = flags.suite_seed;
    if (flags.passed("--results")) exp.results_path = flags.results_path;

    if (exp.out_dir.empty()) {
        const char* root = std::getenv("FGB_OUT_ROOT");
        exp.out_dir = (root != nullptr && *root != '\0' ? std::string(root) : "fgb-out");
        exp.out_dir += "/" + command;
    }
    if (exp.wilcoxon_mode != "paired" && exp.wilcoxon_mode != "per-task-means")
        throw fgb::Error("unknown wilcoxon mode: " + exp.wilcoxon_mode +
                         " (expected paired or per-task-means)");
    return exp;
}

fgb::eval::HeadSet heads_from(const std::vector<std::string>& names) {
    fgb::check(!names.empty(), "empty head list");
    fgb::eval::HeadSet set{false, false, false};
    for (const std::string& n : names) {
        switch (fgb::eval::parse_head_name(n)) {
            case fgb::eval::HeadKind::kMlp: set.mlp = true; break;
            case fgb::eval::HeadKind::kStandardGbdt: set.standard_gbdt = true; break;
            case fgb::eval::HeadKind::kFreeGbdt: set.free_gbdt = true; break;
        }
    }
    return set;
}

const fgb::data::TaskDataset& find_task(const fgb::data::SuiteBundle& bundle,
                                        const std::string& name) {
    if (name.empty()) return bundle.children.front();
    if (name == bundle.parent.task_id) return bundle.parent;
    for (const auto& c : bundle.children)
        if (c.task_id == name) return c;
    throw fgb::Error("task not found in suite: " + name);
}

// Fails before touching the filesystem when the directory is nonempty and
// --overwrite is absent; creates it and drops the resolved config inside.
void prepare_out_dir(const Experiment& exp) {
    const fs::path dir(exp.out_dir);
    if (fs::exists(dir)) {
        fgb::check(fs::is_directory(dir), "output path is not a directory: " + exp.out_dir);
        fgb::check(fs::is_empty(dir) || exp.overwrite,
                   "output directory is not empty (pass --overwrite): " + exp.out_dir);
    } else {
        fs::create_directories(dir);
    }
    std::ofstream out(dir / "config.json");
    fgb::check(out.good(), "cannot write " + (dir / "config.json").string());
    out << experiment_to_json(exp).dump(2) << "\n";
    fgb::check(out.good(), "short write: " + (dir / "config.json").string());
}

void log_cell(const fgb::eval::SeedResult& r) {
    if (r.failed) {
        std::fprintf(stderr, "[%s seed %llu] FAILED: %s\n", r.task_id.c_str(),
                     static_cast<unsigned long long>(r.seed), r.error.c_str());
        return;
    }
    std::string timing;
    for (fgb::eval::HeadKind kind : fgb::eval::kAllHeadKinds) {
        const auto& h = r.head(kind);
        if (!h.present) continue;
        char buf[64];
        std::snprintf(buf, sizeof(buf), " %s %.3fs", fgb::eval::head_name(kind),
                      h.wall_seconds);
        timing += buf;
    }
    std::fprintf(stderr, "[%s seed %llu]%s\n", r.task_id.c_str(),
                 static_cast<unsigned long long>(r.seed), timing.c_str());
}

// Per-seed pretraining checkpoints, shared across that seed's runs.
std::vector<fgb::eval::PretrainedEncoder> pretrain_all(
    const fgb::data::TaskDataset& parent, const Experiment& exp) {
    std::vector<fgb::eval::PretrainedEncoder> out;
    if (!exp.pipeline.use_pretraining || exp.pipeline.pretrain.epochs < 1) return out;
    out.resize(exp.seeds.size());
    for (std::size_t i = 0; i < exp.seeds.size(); ++i)
        out[i] = fgb::eval::pretrain_parent_encoder(parent, exp.seeds[i], exp.pipeline);
    return out;
}

int cmd_gen_suite(const Flags& flags) {
    Experiment exp;
    fgb::data::SuiteBundle bundle;
    try {
        exp = resolve(flags, "gen-suite");
        exp.suite.validate();
        bundle = fgb::data::generate_synthetic_suite(exp.suite);
        prepare_out_dir(exp);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fgb gen-suite: %s\n", e.what());
        return kExitConfig;
    }
    try {
        fgb::data::write_suite(exp.out_dir, exp.suite, bundle);
        std::printf("suite written to %s\n", exp.out_dir.c_str());
        std::printf("  parent: %zu train rows, %u classes\n", bundle.parent.train.size(),
                    bundle.parent.num_classes);
        for (const auto& c : bundle.children)
            std::printf("  %s: %zu train rows, %u classes\n", c.task_id.c_str(),
                        c.train.size(), c.num_classes);
        return kExitOk;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fgb gen-suite: %s\n", e.what());
        return kExitRuntime;
    }
}

int cmd_run(const Flags& flags) {
    Experiment exp;
    fgb::data::SuiteBundle bundle;
    fgb::eval::HeadSet heads;
    try {
        exp = resolve(flags, "run");
        bundle = fgb::data::load_suite(exp.suite_dir);
        heads = heads_from(exp.heads);
        exp.pipeline.validate();
        find_task(bundle, exp.task);
        prepare_out_dir(exp);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fgb run: %s\n", e.what());
        return kExitConfig;
    }
    try {
        const fgb::data::TaskDataset& task = find_task(bundle, exp.task);
        const auto pretrained = pretrain_all(bundle.parent, exp);

        fgb::eval::ComparisonReport sink;  // reuses the results.csv writer
        sink.task_ids = {task.task_id};
        sink.seeds = exp.seeds;
        sink.heads = heads;
        bool any_failed = false;
        for (std::size_t i = 0; i < exp.seeds.size(); ++i) {
            const std::uint64_t seed = exp.seeds[i];
            fgb::eval::SeedResult cell;
            fgb::eval::RunArtifacts art;
            try {
                cell = fgb::eval::run_pipeline(task, seed, exp.pipeline, heads,
                                               pretrained.empty() ? nullptr : &pretrained[i],
                                               &art);
            } catch (const std::exception& e) {
                cell = {};
                cell.task_id = task.task_id;
                cell.seed = seed;
                cell.failed = true;
                cell.error = e.what();
            }
            log_cell(cell);
            if (!cell.failed) {
                const std::string prefix =
                    exp.out_dir + "/seed" + std::to_string(seed) + "_";
                fgb::nn::save_checkpoint(art.state, prefix + "model.fgnn");
                art.during.save(prefix + "during.fgfs");
                if (heads.standard_gbdt) {
                    art.post.save(prefix + "post.fgfs");
                    art.standard_head.save(prefix + "standard.fgbm");
                }
                if (heads.free_gbdt) art.free_head.save(prefix + "free.fgbm");
            }
            any_failed = any_failed || cell.failed;
            sink.results.push_back(std::move(cell));
        }
        fgb::eval::write_results_csv(exp.out_dir + "/results.csv", sink);
        std::printf("results written to %s/results.csv\n", exp.out_dir.c_str());
        return any_failed ? kExitRuntime : kExitOk;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fgb run: %s\n", e.what());
        return kExitRuntime;
    }
}

int cmd_compare(const Flags& flags) {
    Experiment exp;
    fgb::data::SuiteBundle bundle;
    fgb::eval::HeadSet heads;
    try {
        exp = resolve(flags, "compare");
        bundle = fgb::data::load_suite(exp.suite_dir);
        heads = heads_from(exp.heads);
        exp.pipeline.validate();
        fgb::check(exp.seeds.size() >= 2, "compare needs at least 2 seeds");
        prepare_out_dir(exp);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fgb compare: %s\n", e.what());
        return kExitConfig;
    }
    try {
        fgb::eval::ComparisonReport report = fgb::eval::compare_heads(
            bundle.children, &bundle.parent, exp.seeds, exp.pipeline, heads, exp.workers,
            log_cell);
        fgb::eval::write_results_csv(exp.out_dir + "/results.csv", report);
        fgb::eval::write_report_csv(exp.out_dir + "/report.csv", report);

        for (const std::string& tid : report.task_ids) {
            for (fgb::eval::HeadKind kind : fgb::eval::kAllHeadKinds) {
                if (!heads.contains(kind)) continue;
                const auto* agg = report.aggregate(tid, kind);
                if (agg == nullptr || agg->successes == 0) continue;
                std::printf("%-16s %-14s dev %.4f (%.4f)  test %.4f (%.4f)  n=%zu\n",
                            tid.c_str(), fgb::eval::head_name(kind), agg->dev.mean,
                            agg->dev.stddev, agg->test.mean, agg->test.stddev,
                            agg->successes);
            }
        }
        for (const auto& block :
             {report.wilcoxon_paired, report.wilcoxon_task_means}) {
            const bool selected = (block.population == "paired_diffs") ==
                                  (exp.wilcoxon_mode == "paired");
            if (block.valid) {
                std::printf("wilcoxon[%s]%s n=%zu W+=%s p=%s (%s)\n",
                            block.population.c_str(), selected ? " *" : "",
                            block.result.n_effective,
                            fgb::format_double(block.result.w_plus).c_str(),
                            fgb::format_double(block.result.p_value).c_str(),
                            block.result.exact ? "exact" : "normal approx");
            } else {
                std::printf("wilcoxon[%s]%s unavailable: %s\n", block.population.c_str(),
                            selected ? " *" : "", block.note.c_str());
            }
        }
        if (report.failures > 0)
            std::fprintf(stderr, "fgb compare: %zu of %zu cells failed\n", report.failures,
                         report.results.size());
        std::printf("report written to %s/report.csv\n", exp.out_dir.c_str());
        return report.failures > 0 ? kExitRuntime : kExitOk;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fgb compare: %s\n", e.what());
        return kExitRuntime;
    }
}

int cmd_epochs_curve(const Flags& flags) {
    Experiment exp;
    fgb::data::SuiteBundle bundle;
    try {
        exp = resolve(flags, "epochs-curve");
        bundle = fgb::data::load_suite(exp.suite_dir);
        exp.pipeline.validate();
        find_task(bundle, exp.task);
        prepare_out_dir(exp);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fgb epochs-curve: %s\n", e.what());
        return kExitConfig;
    }
    try {
        const fgb::data::TaskDataset& task = find_task(bundle, exp.task);
        Experiment one_seed = exp;
        one_seed.seeds = {exp.seeds.front()};
        const auto pretrained = pretrain_all(bundle.parent, one_seed);
        const auto curve = fgb::eval::epoch_curve(task, exp.seeds.front(), exp.pipeline,
                                                  pretrained.empty() ? nullptr
                                                                     : &pretrained.front());
        fgb::eval::write_curve_csv(exp.out_dir + "/curve.csv", curve);
        for (const auto& p : curve)
            std::printf("epoch %u: loss %.5f mlp %.4f standard %.4f free %.4f (samples %llu/%llu)\n",
                        p.epoch, p.train_loss, p.mlp_dev_accuracy, p.standard_dev_accuracy,
                        p.free_dev_accuracy,
                        static_cast<unsigned long long>(p.standard_samples),
                        static_cast<unsigned long long>(p.free_samples));
        std::printf("curve written to %s/curve.csv\n", exp.out_dir.c_str());
        return kExitOk;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fgb epochs-curve: %s\n", e.what());
        return kExitRuntime;
    }
}

int cmd_trace(const Flags& flags) {
    Experiment exp;
    fgb::data::SuiteBundle bundle;
    try {
        exp = resolve(flags, "trace");
        bundle = fgb::data::load_suite(exp.suite_dir);
        exp.pipeline.validate();
        find_task(bundle, exp.task);
        fgb::check(exp.trace_dimension < exp.pipeline.encoder.feature_dim,
                   "trace dimension out of range");
        prepare_out_dir(exp);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fgb trace: %s\n", e.what());
        return kExitConfig;
    }
    try {
        const fgb::data::TaskDataset& task = find_task(bundle, exp.task);
        Experiment one_seed = exp;
        one_seed.seeds = {exp.seeds.front()};
        const auto pretrained = pretrain_all(bundle.parent, one_seed);
        fgb::nn::ModelState state = fgb::eval::make_task_state(
            task, exp.seeds.front(), exp.pipeline,
            pretrained.empty() ? nullptr : &pretrained.front());
        fgb::head::FeatureStore during;
        fgb::head::fine_tune_accumulate(state, task.train.x, task.train.y,
                                        exp.pipeline.fine_tune, &during);
        fgb::head::FeatureStore post =
            fgb::head::extract_features_post(state, task.train.x, task.train.y);
        const auto rows = fgb::eval::feature_trace(during, post, exp.trace_dimension);
        fgb::eval::write_trace_csv(exp.out_dir + "/trace.csv", rows);
        if (exp.pipeline.fine_tune.epochs >= 2)
            std::printf("drift fraction: %s\n",
                        fgb::format_double(fgb::eval::drift_fraction(during, post)).c_str());
        std::printf("trace written to %s/trace.csv (%zu rows)\n", exp.out_dir.c_str(),
                    rows.size());
        return kExitOk;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fgb trace: %s\n", e.what());
        return kExitRuntime;
    }
}

int cmd_wilcoxon(const Flags& flags) {
    Experiment exp;
    try {
        exp = resolve(flags, "wilcoxon");
        fgb::check(!exp.results_path.empty(), "wilcoxon needs --results RESULTS.csv");
        fgb::check(fs::exists(exp.results_path),
                   "results file not found: " + exp.results_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fgb wilcoxon: %s\n", e.what());
        return kExitConfig;
    }
    try {
        std::string a = "free_gbdt";
        std::string b = "mlp";
        if (flags.passed("--heads") || exp.heads.size() == 2) {
            fgb::check(exp.heads.size() == 2,
                       "wilcoxon wants exactly 2 heads (difference = first minus second)");
            a = exp.heads[0];
            b = exp.heads[1];
        }
        const auto rows = fgb::eval::read_results_csv(exp.results_path);
        const auto diffs = fgb::eval::paired_diffs_from_results(rows, a, b);
        const auto res = fgb::eval::wilcoxon_signed_rank(diffs);
        std::printf("%s minus %s dev accuracy over %zu pairs\n", a.c_str(), b.c_str(),
                    diffs.size());
        std::printf("n_effective=%zu W+=%s p=%s (%s)\n", res.n_effective,
                    fgb::format_double(res.w_plus).c_str(),
                    fgb::format_double(res.p_value).c_str(),
                    res.exact ? "exact" : "normal approx");
        return kExitOk;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fgb wilcoxon: %s\n", e.what());
        return kExitRuntime;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"three classification heads (mlp, standard_gbdt, free_gbdt) over one "
                 "fine-tuning session"};
    app.require_subcommand(1);

    Flags gen_flags, run_flags, compare_flags, curve_flags, trace_flags, wilcoxon_flags;

    CLI::App* gen = app.add_subcommand("gen-suite", "generate the synthetic task suite");
    add_common_flags(gen, &gen_flags);
    gen->add_option("--suite-seed", gen_flags.suite_seed, "suite generation seed");

    CLI::App* run = app.add_subcommand("run", "single-task pipeline runs; saves stores, "
                                              "checkpoints and per-seed results");
    add_common_flags(run, &run_flags);
    run->add_option("--suite", run_flags.suite_dir, "suite directory from gen-suite");
    run->add_option("--task", run_flags.task, "task id (default: first child task)");

    CLI::App* compare = app.add_subcommand("compare", "multi-seed sweep over all child "
                                                      "tasks with aggregate report");
    add_common_flags(compare, &compare_flags);
    compare->add_option("--suite", compare_flags.suite_dir, "suite directory from gen-suite");
    compare->add_option("--wilcoxon", compare_flags.wilcoxon_mode,
                        "highlighted population: paired or per-task-means");

    CLI::App* curve = app.add_subcommand("epochs-curve", "per-epoch head accuracies for "
                                                         "one (task, seed)");
    add_common_flags(curve, &curve_flags);
    curve->add_option("--suite", curve_flags.suite_dir, "suite directory from gen-suite");
    curve->add_option("--task", curve_flags.task, "task id (default: first child task)");

    CLI::App* trace = app.add_subcommand("trace", "during-vs-post values of one feature "
                                                  "dimension for one (task, seed)");
    add_common_flags(trace, &trace_flags);
    trace->add_option("--suite", trace_flags.suite_dir, "suite directory from gen-suite");
    trace->add_option("--task", trace_flags.task, "task id (default: first child task)");
    trace->add_option("--dimension", trace_flags.trace_dimension, "feature dimension index");

    CLI::App* wilcoxon = app.add_subcommand("wilcoxon", "signed-rank test over a results "
                                                        "file (first head minus second)");
    add_common_flags(wilcoxon, &wilcoxon_flags);
    wilcoxon->add_option("--results", wilcoxon_flags.results_path,
                         "results.csv from run or compare");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    if (app.got_subcommand(gen)) return cmd_gen_suite(gen_flags);
    if (app.got_subcommand(run)) return cmd_run(run_flags);
    if (app.got_subcommand(compare)) return cmd_compare(compare_flags);
    if (app.got_subcommand(curve)) return cmd_epochs_curve(curve_flags);
    if (app.got_subcommand(trace)) return cmd_trace(trace_flags);
    if (app.got_subcommand(wilcoxon)) return cmd_wilcoxon(wilcoxon_flags);
    std::fprintf(stderr, "fgb: no subcommand\n");
    return kExitConfig;
}
