#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "fgb/common.hpp"
#include "fgb/data/dataset.hpp"

namespace fgb::data {

// A desk-scale transfer suite: one parent task (the intermediate
// pretraining analogue) and several child tasks. All tasks share latent
// Gaussian class centers and a semi-orthogonal projection to input space;
// each child additionally applies a small task-specific rotation, collapses
// the latent classes onto its own label set, and flips a fraction of
// labels. Pretraining on the parent therefore transfers to the children.
struct ChildSpec {
    std::string task_id;
    std::size_t train_size = 0;
    std::size_t dev_size = 0;
    std::size_t test_size = 0;
    std::uint32_t num_classes = 2;
    std::uint64_t rotation_seed = 0;
    double label_noise = 0.1;
};

struct SyntheticSuiteSpec {
    std::uint32_t latent_dim = 16;
    std::uint32_t input_dim = 32;
    std::uint32_t num_latent_classes = 6;
    double center_separation = 0.85;
    double rotation_angle = 0.08;
    std::size_t parent_train = 6000;
    std::size_t parent_dev = 600;
    std::size_t parent_test = 600;
    std::vector<ChildSpec> children;
    std::uint64_t seed = 0;

    void validate() const {
        check(latent_dim >= 1 && input_dim >= latent_dim,
              "suite: need input_dim >= latent_dim >= 1");
        check(num_latent_classes >= 2, "suite: need at least 2 latent classes");
        check(parent_train >= 2 * num_latent_classes, "suite: parent train too small");
        check(parent_dev >= 1 && parent_test >= 1, "suite: empty parent split");
        check(!children.empty(), "suite: no child tasks");
        for (const ChildSpec& c : children) {
            check(!c.task_id.empty(), "suite: child without task_id");
            check(c.num_classes >= 2 && c.num_classes <= num_latent_classes,
                  "suite: child " + c.task_id + " class count out of range");
            check(c.train_size >= 2 * c.num_classes,
                  "suite: child " + c.task_id + " train too small for its classes");
            check(c.dev_size >= 1 && c.test_size >= 1,
                  "suite: child " + c.task_id + " has an empty split");
            check(c.label_noise >= 0.0 && c.label_noise < 0.5,
                  "suite: child " + c.task_id + " label noise out of [0, 0.5)");
        }
    }
};

// Sizes echo a small/medium/large corpus spread (250 / 2.5k / 6.6k training
// rows) so head differences remain measurable at desk scale.
inline SyntheticSuiteSpec default_suite_spec(std::uint64_t seed = 0) {
    SyntheticSuiteSpec spec;
    spec.seed = seed;
    spec.children = {
        {"child_small", 250, 57, 250, 3, 101, 0.1},
        {"child_medium", 2500, 278, 3000, 2, 102, 0.1},
        {"child_large", 6600, 800, 1600, 3, 103, 0.1},
    };
    return spec;
}

struct SuiteBundle {
    TaskDataset parent;
    std::vector<TaskDataset> children;
};

namespace detail {

// Rows are orthonormalized gaussian draws: a semi-orthogonal projection, so
// latent distances survive into input space.
inline Matrix random_semi_orthogonal(Rng& rng, std::size_t rows, std::size_t cols) {
    Matrix p(rows, cols);
    for (auto& v : p.storage()) v = rng.gaussian();
    for (std::size_t r = 0; r < rows; ++r) {
        double* row = p.row(r);
        for (std::size_t prev = 0; prev < r; ++prev) {
            const double* q = p.row(prev);
            double dot = 0.0;
            for (std::size_t j = 0; j < cols; ++j) dot += row[j] * q[j];
            for (std::size_t j = 0; j < cols; ++j) row[j] -= dot * q[j];
        }
        double norm = 0.0;
        for (std::size_t j = 0; j < cols; ++j) norm += row[j] * row[j];
        norm = std::sqrt(norm);
        check(norm > 1e-9, "suite: degenerate projection draw");
        for (std::size_t j = 0; j < cols; ++j) row[j] /= norm;
    }
    return p;
}

// Product of `count` random-plane Givens rotations by a fixed small angle.
inline Matrix random_rotation(std::uint64_t seed, std::size_t dim, double angle,
                              std::size_t count) {
    Rng rng(seed);
    Matrix r(dim, dim);
    for (std::size_t i = 0; i < dim; ++i) r(i, i) = 1.0;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    for (std::size_t t = 0; t < count; ++t) {
        std::size_t i = rng.below(dim);
        std::size_t j = rng.below(dim - 1);
        if (j >= i) ++j;
        // Right-multiply r by the plane rotation: mixes columns i and j.
        for (std::size_t row = 0; row < dim; ++row) {
            double a = r(row, i);
            double b = r(row, j);
            r(row, i) = c * a - s * b;
            r(row, j) = s * a + c * b;
        }
    }
    return r;
}

struct SuiteGeometry {
    Matrix centers;     // num_latent_classes x latent_dim
    Matrix projection;  // latent_dim x input_dim
};

inline SuiteGeometry suite_geometry(const SyntheticSuiteSpec& spec) {
    Rng rng(spec.seed);
    SuiteGeometry g;
    g.centers = Matrix(spec.num_latent_classes, spec.latent_dim);
    for (auto& v : g.centers.storage()) v = spec.center_separation * rng.gaussian();
    g.projection = random_semi_orthogonal(rng, spec.latent_dim, spec.input_dim);
    return g;
}

// One split of samples: latent class -> latent point -> input point.
// rotation may be null (parent task).
inline SplitData sample_split(Rng& rng, const SuiteGeometry& g, const Matrix* rotation,
                              std::size_t n, std::uint32_t latent_classes,
                              std::uint32_t task_classes) {
    const std::size_t latent_dim = g.centers.cols();
    const std::size_t input_dim = g.projection.cols();
    SplitData split;
    split.x = Matrix(n, input_dim);
    split.y.resize(n);
    std::vector<double> z(latent_dim);
    std::vector<double> x(input_dim);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t c = static_cast<std::uint32_t>(rng.below(latent_classes));
        const double* center = g.centers.row(c);
        for (std::size_t l = 0; l < latent_dim; ++l) z[l] = center[l] + rng.gaussian();
        for (std::size_t j = 0; j < input_dim; ++j) {
            double s = 0.0;
            for (std::size_t l = 0; l < latent_dim; ++l) s += z[l] * g.projection(l, j);
            x[j] = s;
        }
        if (rotation) {
            double* out = split.x.row(i);
            for (std::size_t j = 0; j < input_dim; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < input_dim; ++k) s += x[k] * (*rotation)(k, j);
                out[j] = s;
            }
        } else {
            for (std::size_t j = 0; j < input_dim; ++j) split.x(i, j) = x[j];
        }
        split.y[i] = static_cast<int>(c % task_classes);
    }
    return split;
}

// Label noise runs off its own rng in a second pass, so the feature stream
// is identical across noise rates.
inline void apply_label_noise(Rng& rng, SplitData* split, double rate,
                              std::uint32_t num_classes) {
    for (auto& label : split->y) {
        const double u = rng.uniform();
        if (u >= rate) continue;
        std::uint32_t other =
            static_cast<std::uint32_t>(rng.below(num_classes - 1));
        if (other >= static_cast<std::uint32_t>(label)) ++other;
        label = static_cast<int>(other);
    }
}

}  // namespace detail

inline SuiteBundle generate_synthetic_suite(const SyntheticSuiteSpec& spec) {
    spec.validate();
    const detail::SuiteGeometry geometry = detail::suite_geometry(spec);

    // Every task draws from its own derived stream, so adding a child never
    // perturbs the others.
    Rng master(spec.seed ^ 0x9e3779b97f4a7c15ull);
    const std::uint64_t parent_seed = master.next_u64();
    std::vector<std::uint64_t> sample_seeds;
    std::vector<std::uint64_t> noise_seeds;
    for (std::size_t k = 0; k < spec.children.size(); ++k) {
        sample_seeds.push_back(master.next_u64());
        noise_seeds.push_back(master.next_u64());
    }

    SuiteBundle bundle;
    bundle.parent.task_id = "parent";
    bundle.parent.num_classes = spec.num_latent_classes;
    {
        Rng rng(parent_seed);
        bundle.parent.train = detail::sample_split(rng, geometry, nullptr, spec.parent_train,
                                                   spec.num_latent_classes,
                                                   spec.num_latent_classes);
        bundle.parent.dev = detail::sample_split(rng, geometry, nullptr, spec.parent_dev,
                                                 spec.num_latent_classes,
                                                 spec.num_latent_classes);
        bundle.parent.test = detail::sample_split(rng, geometry, nullptr, spec.parent_test,
                                                  spec.num_latent_classes,
                                                  spec.num_latent_classes);
    }
    bundle.parent.validate();

    for (std::size_t k = 0; k < spec.children.size(); ++k) {
        const ChildSpec& cs = spec.children[k];
        const Matrix rotation = detail::random_rotation(cs.rotation_seed, spec.input_dim,
                                                        spec.rotation_angle, spec.input_dim);
        TaskDataset task;
        task.task_id = cs.task_id;
        task.num_classes = cs.num_classes;
        Rng rng(sample_seeds[k]);
        task.train = detail::sample_split(rng, geometry, &rotation, cs.train_size,
                                          spec.num_latent_classes, cs.num_classes);
        task.dev = detail::sample_split(rng, geometry, &rotation, cs.dev_size,
                                        spec.num_latent_classes, cs.num_classes);
        task.test = detail::sample_split(rng, geometry, &rotation, cs.test_size,
                                         spec.num_latent_classes, cs.num_classes);
        Rng noise(noise_seeds[k]);
        detail::apply_label_noise(noise, &task.train, cs.label_noise, cs.num_classes);
        detail::apply_label_noise(noise, &task.dev, cs.label_noise, cs.num_classes);
        detail::apply_label_noise(noise, &task.test, cs.label_noise, cs.num_classes);
        task.validate();
        bundle.children.push_back(std::move(task));
    }
    return bundle;
}

// ---------------------------------------------------------------------------
// Suite directory layout: manifest.txt plus the usual <task>_<split>.csv
// trio per task. The manifest is line-oriented key=value, with one
// child=... line per child task.

namespace detail {

inline std::string manifest_escape_check(const std::string& id) {
    for (char ch : id) {
        check((ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                  (ch >= '0' && ch <= '9') || ch == '_' || ch == '-',
              "suite: task_id must be alphanumeric/underscore/dash: " + id);
    }
    return id;
}

}  // namespace detail

inline void write_suite(const std::string& dir, const SyntheticSuiteSpec& spec,
                        const SuiteBundle& bundle) {
    const std::string path = dir + "/manifest.txt";
    std::ofstream out(path);
    check(out.good(), "cannot open " + path + " for writing");
    out << "format=fgb-suite-v1\n";
    out << "seed=" << spec.seed << "\n";
    out << "latent_dim=" << spec.latent_dim << "\n";
    out << "input_dim=" << spec.input_dim << "\n";
    out << "num_latent_classes=" << spec.num_latent_classes << "\n";
    out << "center_separation=" << format_double(spec.center_separation) << "\n";
    out << "rotation_angle=" << format_double(spec.rotation_angle) << "\n";
    out << "parent=" << detail::manifest_escape_check(bundle.parent.task_id) << ","
        << bundle.parent.num_classes << "\n";
    for (std::size_t k = 0; k < bundle.children.size(); ++k) {
        const ChildSpec& cs = spec.children.at(k);
        out << "child=" << detail::manifest_escape_check(cs.task_id) << ","
            << cs.num_classes << "," << cs.train_size << "," << cs.dev_size << ","
            << cs.test_size << "," << cs.rotation_seed << ","
            << format_double(cs.label_noise) << "\n";
    }
    out.flush();
    check(out.good(), "failed writing " + path);
    write_task(bundle.parent, dir);
    for (const TaskDataset& child : bundle.children) write_task(child, dir);
}

inline SuiteBundle load_suite(const std::string& dir) {
    const std::string path = dir + "/manifest.txt";
    std::ifstream in(path);
    check(in.good(), "cannot open " + path);
    std::string line;
    check(static_cast<bool>(std::getline(in, line)), path + ": empty manifest");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    check(line == "format=fgb-suite-v1", path + ": unrecognized manifest format");

    auto parse_fields = [&](const std::string& value) {
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = value.find(',', start);
            if (comma == std::string::npos) {
                fields.push_back(value.substr(start));
                break;
            }
            fields.push_back(value.substr(start, comma - start));
            start = comma + 1;
        }
        return fields;
    };
    auto parse_classes = [&](const std::string& text) {
        char* end = nullptr;
        const long v = std::strtol(text.c_str(), &end, 10);
        check(end && *end == '\0' && v >= 2, path + ": bad class count '" + text + "'");
        return static_cast<std::uint32_t>(v);
    };

    std::string parent_id;
    std::uint32_t parent_classes = 0;
    std::vector<std::pair<std::string, std::uint32_t>> child_ids;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        check(eq != std::string::npos, path + ": malformed line '" + line + "'");
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "parent") {
            const auto fields = parse_fields(value);
            check(fields.size() == 2, path + ": malformed parent line");
            parent_id = fields[0];
            parent_classes = parse_classes(fields[1]);
        } else if (key == "child") {
            const auto fields = parse_fields(value);
            check(fields.size() == 7, path + ": malformed child line");
            child_ids.emplace_back(fields[0], parse_classes(fields[1]));
        }
        // Geometry keys only document how the suite was generated.
    }
    check(!parent_id.empty(), path + ": manifest has no parent task");
    check(!child_ids.empty(), path + ": manifest has no child tasks");

    SuiteBundle bundle;
    bundle.parent = load_task(dir, parent_id, parent_classes);
    for (const auto& [id, classes] : child_ids) {
        bundle.children.push_back(load_task(dir, id, classes));
    }
    return bundle;
}

}  // namespace fgb::data
