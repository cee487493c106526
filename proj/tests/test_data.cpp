#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fgb/data/dataset.hpp"
#include "fgb/data/synthetic.hpp"

using fgb::Matrix;
using fgb::Rng;
using fgb::data::SplitData;
using fgb::data::SuiteBundle;
using fgb::data::SyntheticSuiteSpec;
using fgb::data::TaskDataset;

namespace {

SplitData random_split(std::size_t n, std::size_t dim, std::uint32_t classes,
                       std::uint64_t seed) {
    Rng rng(seed);
    SplitData s;
    s.x = Matrix(n, dim);
    s.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dim; ++j) s.x(i, j) = rng.gaussian();
        s.y[i] = static_cast<int>(rng.below(classes));
    }
    return s;
}

std::string write_lines(const char* name, const std::vector<std::string>& lines) {
    std::string path = std::string("fgb_test_") + name + ".csv";
    std::ofstream out(path, std::ios::trunc);
    for (const auto& l : lines) out << l << "\n";
    return path;
}

const SuiteBundle& default_bundle() {
    static const SuiteBundle bundle =
        fgb::data::generate_synthetic_suite(fgb::data::default_suite_spec(7));
    return bundle;
}

}  // namespace

TEST_CASE("csv writing and loading round trips bit-exactly") {
    SplitData split = random_split(40, 5, 3, 1);
    split.x(0, 0) = 0.1;  // not exactly representable; %.17g must survive
    split.x(1, 1) = -1e-300;
    split.x(2, 2) = 12345678.901234567;
    const std::string path = write_lines("roundtrip", {});
    fgb::data::write_split_csv(split, path);
    SplitData back = fgb::data::load_split_csv(path);
    std::remove(path.c_str());
    REQUIRE(back == split);
}

TEST_CASE("csv loader reports the offending line") {
    SECTION("bad feature value") {
        const std::string path = write_lines(
            "badcell", {"label,f0,f1", "0,1.0,2.0", "1,3.0,4.0", "0,oops,6.0"});
        REQUIRE_THROWS_WITH(fgb::data::load_split_csv(path),
                            Catch::Matchers::ContainsSubstring("line 4") &&
                                Catch::Matchers::ContainsSubstring("oops"));
        std::remove(path.c_str());
    }
    SECTION("ragged row") {
        const std::string path =
            write_lines("ragged", {"label,f0,f1", "0,1.0,2.0", "1,3.0"});
        REQUIRE_THROWS_WITH(fgb::data::load_split_csv(path),
                            Catch::Matchers::ContainsSubstring("line 3") &&
                                Catch::Matchers::ContainsSubstring("cells"));
        std::remove(path.c_str());
    }
    SECTION("negative label") {
        const std::string path = write_lines("neglabel", {"label,f0", "-1,0.5"});
        REQUIRE_THROWS_WITH(fgb::data::load_split_csv(path),
                            Catch::Matchers::ContainsSubstring("bad label"));
        std::remove(path.c_str());
    }
    SECTION("missing header") {
        const std::string path = write_lines("nohdr", {"0,1.0", "1,2.0"});
        REQUIRE_THROWS_WITH(fgb::data::load_split_csv(path),
                            Catch::Matchers::ContainsSubstring("header"));
        std::remove(path.c_str());
    }
    SECTION("non-finite feature") {
        const std::string path = write_lines("inf", {"label,f0", "0,inf"});
        REQUIRE_THROWS_AS(fgb::data::load_split_csv(path), fgb::Error);
        std::remove(path.c_str());
    }
}

TEST_CASE("csv loader tolerates CRLF and blank lines") {
    const std::string path =
        write_lines("crlf", {"label,f0,f1\r", "0,1.5,2.5\r", "", "1,3.5,4.5"});
    SplitData split = fgb::data::load_split_csv(path);
    std::remove(path.c_str());
    REQUIRE(split.size() == 2);
    REQUIRE(split.x(0, 1) == 2.5);
    REQUIRE(split.y[1] == 1);
}

TEST_CASE("stratified split hits exact sizes per class") {
    // 500/300/200 class histogram; 0.8/0.1/0.1 divides each class exactly.
    SplitData data;
    data.x = Matrix(1000, 2);
    data.y.resize(1000);
    Rng rng(5);
    for (std::size_t i = 0; i < 1000; ++i) {
        data.y[i] = i < 500 ? 0 : (i < 800 ? 1 : 2);
        data.x(i, 0) = static_cast<double>(i);
        data.x(i, 1) = rng.uniform();
    }
    TaskDataset task = fgb::data::split_dataset(data, "demo", 3, 0.8, 0.1, 0.1, 42);
    task.validate();
    REQUIRE(task.train.size() == 800);
    REQUIRE(task.dev.size() == 100);
    REQUIRE(task.test.size() == 100);

    auto class_counts = [](const SplitData& s) {
        std::vector<std::size_t> c(3, 0);
        for (int label : s.y) c[static_cast<std::size_t>(label)] += 1;
        return c;
    };
    REQUIRE(class_counts(task.train) == std::vector<std::size_t>{400, 240, 160});
    REQUIRE(class_counts(task.dev) == std::vector<std::size_t>{50, 30, 20});
    REQUIRE(class_counts(task.test) == std::vector<std::size_t>{50, 30, 20});

    // Every input row lands in exactly one split: f0 was a unique row id.
    std::vector<bool> seen(1000, false);
    for (const SplitData* s : {&task.train, &task.dev, &task.test}) {
        for (std::size_t i = 0; i < s->size(); ++i) {
            const auto id = static_cast<std::size_t>(s->x(i, 0));
            REQUIRE_FALSE(seen[id]);
            seen[id] = true;
            REQUIRE(data.y[id] == s->y[i]);
        }
    }

    TaskDataset again = fgb::data::split_dataset(data, "demo", 3, 0.8, 0.1, 0.1, 42);
    REQUIRE(again == task);
    TaskDataset other = fgb::data::split_dataset(data, "demo", 3, 0.8, 0.1, 0.1, 43);
    REQUIRE_FALSE(other.train == task.train);
}

TEST_CASE("split rejects bad fractions") {
    SplitData data = random_split(30, 2, 2, 9);
    REQUIRE_THROWS_WITH(fgb::data::split_dataset(data, "t", 2, 0.8, 0.1, 0.2, 1),
                        Catch::Matchers::ContainsSubstring("sum to 1"));
}

TEST_CASE("synthetic suite generation is deterministic") {
    const SuiteBundle& a = default_bundle();
    SuiteBundle b = fgb::data::generate_synthetic_suite(fgb::data::default_suite_spec(7));
    REQUIRE(b.parent == a.parent);
    REQUIRE(b.children.size() == a.children.size());
    for (std::size_t k = 0; k < a.children.size(); ++k)
        REQUIRE(b.children[k] == a.children[k]);

    SuiteBundle c = fgb::data::generate_synthetic_suite(fgb::data::default_suite_spec(8));
    REQUIRE_FALSE(c.parent.train == a.parent.train);
}

TEST_CASE("synthetic suite has the advertised shape") {
    const SuiteBundle& bundle = default_bundle();
    REQUIRE(bundle.parent.task_id == "parent");
    REQUIRE(bundle.parent.num_classes == 6);
    REQUIRE(bundle.parent.train.size() == 6000);
    REQUIRE(bundle.parent.input_dim() == 32);
    REQUIRE(bundle.children.size() == 3);
    REQUIRE(bundle.children[0].task_id == "child_small");
    REQUIRE(bundle.children[0].train.size() == 250);
    REQUIRE(bundle.children[0].dev.size() == 57);
    REQUIRE(bundle.children[0].test.size() == 250);
    REQUIRE(bundle.children[0].num_classes == 3);
    REQUIRE(bundle.children[1].task_id == "child_medium");
    REQUIRE(bundle.children[1].train.size() == 2500);
    REQUIRE(bundle.children[1].num_classes == 2);
    REQUIRE(bundle.children[2].task_id == "child_large");
    REQUIRE(bundle.children[2].train.size() == 6600);
    for (const TaskDataset& child : bundle.children) {
        REQUIRE(child.input_dim() == 32);
        REQUIRE_NOTHROW(child.validate());
    }
}

TEST_CASE("the projection preserves latent distances") {
    SyntheticSuiteSpec spec = fgb::data::default_suite_spec(3);
    auto geometry = fgb::data::detail::suite_geometry(spec);
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> za(spec.latent_dim), zb(spec.latent_dim);
        for (auto& v : za) v = rng.gaussian();
        for (auto& v : zb) v = rng.gaussian();
        double latent_sq = 0.0;
        for (std::size_t l = 0; l < za.size(); ++l)
            latent_sq += (za[l] - zb[l]) * (za[l] - zb[l]);
        double input_sq = 0.0;
        for (std::size_t j = 0; j < spec.input_dim; ++j) {
            double da = 0.0;
            for (std::size_t l = 0; l < za.size(); ++l)
                da += (za[l] - zb[l]) * geometry.projection(l, j);
            input_sq += da * da;
        }
        REQUIRE(std::abs(input_sq - latent_sq) < 1e-9 * latent_sq);
    }
}

TEST_CASE("a nearest-centroid oracle solves a well-separated parent task") {
    SyntheticSuiteSpec spec = fgb::data::default_suite_spec(7);
    spec.center_separation = 2.5;
    for (auto& child : spec.children) child.label_noise = 0.0;
    const SuiteBundle bundle = fgb::data::generate_synthetic_suite(spec);
    const TaskDataset& parent = bundle.parent;
    Matrix centroids(parent.num_classes, parent.input_dim());
    std::vector<std::size_t> counts(parent.num_classes, 0);
    for (std::size_t i = 0; i < parent.train.size(); ++i) {
        const auto c = static_cast<std::size_t>(parent.train.y[i]);
        counts[c] += 1;
        for (std::size_t j = 0; j < parent.input_dim(); ++j)
            centroids(c, j) += parent.train.x(i, j);
    }
    for (std::size_t c = 0; c < parent.num_classes; ++c) {
        REQUIRE(counts[c] > 0);
        for (std::size_t j = 0; j < parent.input_dim(); ++j)
            centroids(c, j) /= static_cast<double>(counts[c]);
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < parent.test.size(); ++i) {
        double best = 0.0;
        std::size_t best_c = 0;
        for (std::size_t c = 0; c < parent.num_classes; ++c) {
            double d = 0.0;
            for (std::size_t j = 0; j < parent.input_dim(); ++j) {
                const double diff = parent.test.x(i, j) - centroids(c, j);
                d += diff * diff;
            }
            if (c == 0 || d < best) {
                best = d;
                best_c = c;
            }
        }
        if (best_c == static_cast<std::size_t>(parent.test.y[i])) ++hits;
    }
    const double accuracy =
        static_cast<double>(hits) / static_cast<double>(parent.test.size());
    REQUIRE(accuracy >= 0.99);
}

TEST_CASE("label noise flips the advertised fraction without moving features") {
    SyntheticSuiteSpec noisy = fgb::data::default_suite_spec(7);
    SyntheticSuiteSpec clean = noisy;
    for (auto& child : clean.children) child.label_noise = 0.0;
    SuiteBundle nb = fgb::data::generate_synthetic_suite(noisy);
    SuiteBundle cb = fgb::data::generate_synthetic_suite(clean);

    for (std::size_t k = 0; k < nb.children.size(); ++k) {
        REQUIRE(nb.children[k].train.x == cb.children[k].train.x);
        REQUIRE(nb.children[k].dev.x == cb.children[k].dev.x);
        REQUIRE(nb.children[k].test.x == cb.children[k].test.x);
    }

    const auto& noisy_large = nb.children[2].train;
    const auto& clean_large = cb.children[2].train;
    REQUIRE(noisy_large.size() == 6600);
    std::size_t flips = 0;
    for (std::size_t i = 0; i < noisy_large.size(); ++i)
        if (noisy_large.y[i] != clean_large.y[i]) ++flips;
    const double rate = static_cast<double>(flips) / 6600.0;
    REQUIRE(rate > 0.08);
    REQUIRE(rate < 0.12);
}

TEST_CASE("infeasible suite specs are rejected") {
    SECTION("child train split too small") {
        SyntheticSuiteSpec spec = fgb::data::default_suite_spec(1);
        spec.children[0].train_size = 3;
        REQUIRE_THROWS_WITH(fgb::data::generate_synthetic_suite(spec),
                            Catch::Matchers::ContainsSubstring("too small"));
    }
    SECTION("noise rate out of range") {
        SyntheticSuiteSpec spec = fgb::data::default_suite_spec(1);
        spec.children[1].label_noise = 0.6;
        REQUIRE_THROWS_AS(fgb::data::generate_synthetic_suite(spec), fgb::Error);
    }
    SECTION("more child classes than latent classes") {
        SyntheticSuiteSpec spec = fgb::data::default_suite_spec(1);
        spec.children[0].num_classes = 9;
        REQUIRE_THROWS_AS(fgb::data::generate_synthetic_suite(spec), fgb::Error);
    }
    SECTION("no children") {
        SyntheticSuiteSpec spec = fgb::data::default_suite_spec(1);
        spec.children.clear();
        REQUIRE_THROWS_AS(fgb::data::generate_synthetic_suite(spec), fgb::Error);
    }
}

TEST_CASE("suite directory round trips through manifest and csv files") {
    namespace fs = std::filesystem;
    SyntheticSuiteSpec spec = fgb::data::default_suite_spec(13);
    // Shrink for file-size friendliness; geometry identical in kind.
    spec.parent_train = 300;
    spec.parent_dev = 60;
    spec.parent_test = 60;
    spec.children = {
        {"alpha", 80, 20, 20, 3, 101, 0.1},
        {"beta", 90, 20, 20, 2, 102, 0.0},
    };
    SuiteBundle bundle = fgb::data::generate_synthetic_suite(spec);

    const fs::path dir = fs::path("fgb_test_suite_dir");
    fs::create_directories(dir);
    fgb::data::write_suite(dir.string(), spec, bundle);
    REQUIRE(fs::exists(dir / "manifest.txt"));
    REQUIRE(fs::exists(dir / "parent_train.csv"));
    REQUIRE(fs::exists(dir / "alpha_dev.csv"));
    REQUIRE(fs::exists(dir / "beta_test.csv"));

    SuiteBundle back = fgb::data::load_suite(dir.string());
    REQUIRE(back.parent == bundle.parent);
    REQUIRE(back.children.size() == 2);
    REQUIRE(back.children[0] == bundle.children[0]);
    REQUIRE(back.children[1] == bundle.children[1]);
    fs::remove_all(dir);
}

TEST_CASE("child labels follow the latent classes modulo the class count") {
    SyntheticSuiteSpec spec = fgb::data::default_suite_spec(7);
    for (auto& child : spec.children) child.label_noise = 0.0;
    SuiteBundle bundle = fgb::data::generate_synthetic_suite(spec);
    // With balanced latent draws each child class covers ~(6/K)/6 of rows.
    for (const TaskDataset& child : bundle.children) {
        std::vector<std::size_t> counts(child.num_classes, 0);
        for (int label : child.train.y) counts[static_cast<std::size_t>(label)] += 1;
        const double expected =
            static_cast<double>(child.train.size()) / child.num_classes;
        for (std::size_t c = 0; c < child.num_classes; ++c) {
            REQUIRE(static_cast<double>(counts[c]) > 0.7 * expected);
            REQUIRE(static_cast<double>(counts[c]) < 1.3 * expected);
        }
    }
}
