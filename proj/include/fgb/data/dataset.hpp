#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "fgb/common.hpp"

namespace fgb::data {

struct SplitData {
    Matrix x;
    std::vector<int> y;

    std::size_t size() const { return y.size(); }
    bool operator==(const SplitData&) const = default;
};

struct TaskDataset {
    std::string task_id;
    std::uint32_t num_classes = 0;
    SplitData train;
    SplitData dev;
    SplitData test;

    std::size_t input_dim() const { return train.x.cols(); }
    bool operator==(const TaskDataset&) const = default;

    void validate() const {
        check(num_classes >= 2, "dataset " + task_id + ": num_classes must be >= 2");
        check(train.size() >= 1, "dataset " + task_id + ": empty train split");
        auto check_split = [&](const SplitData& s, const char* name) {
            check(s.x.rows() == s.y.size(),
                  "dataset " + task_id + ": " + name + " label count mismatch");
            check(s.size() == 0 || s.x.cols() == train.x.cols(),
                  "dataset " + task_id + ": " + name + " width mismatch");
            for (int label : s.y)
                check(label >= 0 && static_cast<std::uint32_t>(label) < num_classes,
                      "dataset " + task_id + ": " + name + " label out of range");
        };
        check_split(train, "train");
        check_split(dev, "dev");
        check_split(test, "test");
        // Every class seen in dev/test must be learnable from train.
        std::vector<bool> in_train(num_classes, false);
        for (int label : train.y) in_train[static_cast<std::size_t>(label)] = true;
        for (const SplitData* s : {&dev, &test})
            for (int label : s->y)
                check(in_train[static_cast<std::size_t>(label)],
                      "dataset " + task_id + ": class " + std::to_string(label) +
                          " missing from train split");
    }
};

// CSV schema: header "label,f0,f1,...", one small nonnegative integer label
// plus fixed-width finite feature cells per row. Row order is preserved
// exactly; nothing here ever shuffles data.
inline SplitData load_split_csv(const std::string& path) {
    std::ifstream in(path);
    check(in.good(), "cannot open for reading: " + path);

    std::string line;
    check(static_cast<bool>(std::getline(in, line)), path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    check(line.rfind("label", 0) == 0 && (line.size() == 5 || line[5] == ','),
          path + ": header must start with 'label'");
    std::size_t n_features = 0;
    for (char ch : line)
        if (ch == ',') ++n_features;

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        std::size_t cell = 0;
        std::size_t begin = 0;
        for (std::size_t pos = 0; pos <= line.size(); ++pos) {
            if (pos != line.size() && line[pos] != ',') continue;
            const std::string field = line.substr(begin, pos - begin);
            begin = pos + 1;
            check(!field.empty(),
                  path + ": line " + std::to_string(line_no) + ": empty cell");
            const char* start = field.c_str();
            char* end = nullptr;
            if (cell == 0) {
                long label = std::strtol(start, &end, 10);
                check(end == start + field.size() && label >= 0 && label <= 0xffff,
                      path + ": line " + std::to_string(line_no) +
                          ": bad label '" + field + "'");
                labels.push_back(static_cast<int>(label));
            } else {
                double v = std::strtod(start, &end);
                check(end == start + field.size() && std::isfinite(v),
                      path + ": line " + std::to_string(line_no) +
                          ": bad feature value '" + field + "'");
                values.push_back(v);
            }
            ++cell;
        }
        check(cell == n_features + 1,
              path + ": line " + std::to_string(line_no) + ": expected " +
                  std::to_string(n_features + 1) + " cells, got " + std::to_string(cell));
    }

    SplitData split;
    split.x = Matrix(labels.size(), n_features);
    split.x.storage() = std::move(values);
    split.y = std::move(labels);
    return split;
}

inline void write_split_csv(const SplitData& split, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    check(out.good(), "cannot open for writing: " + path);
    out << "label";
    for (std::size_t j = 0; j < split.x.cols(); ++j) out << ",f" << j;
    out << "\n";
    for (std::size_t i = 0; i < split.size(); ++i) {
        out << split.y[i];
        for (std::size_t j = 0; j < split.x.cols(); ++j)
            out << "," << format_double(split.x(i, j));
        out << "\n";
    }
    check(out.good(), "short write: " + path);
}

// Stratified train/dev/test split: per class, deterministic in seed, sizes
// allocated by largest remainder so totals are exact.
inline TaskDataset split_dataset(const SplitData& data, const std::string& task_id,
                                 std::uint32_t num_classes, double train_frac,
                                 double dev_frac, double test_frac, std::uint64_t seed) {
    check(std::abs(train_frac + dev_frac + test_frac - 1.0) < 1e-9,
          "split_dataset: fractions must sum to 1");
    check(train_frac >= 0 && dev_frac >= 0 && test_frac >= 0,
          "split_dataset: negative fraction");

    std::vector<std::vector<std::size_t>> by_class(num_classes);
    for (std::size_t i = 0; i < data.size(); ++i) {
        check(data.y[i] >= 0 && static_cast<std::uint32_t>(data.y[i]) < num_classes,
              "split_dataset: label out of range at row " + std::to_string(i));
        by_class[static_cast<std::size_t>(data.y[i])].push_back(i);
    }

    Rng rng(seed);
    std::vector<int> assignment(data.size(), 0);  // 0 train, 1 dev, 2 test
    const double fracs[3] = {train_frac, dev_frac, test_frac};
    for (auto& rows : by_class) {
        rng.shuffle(rows);
        const std::size_t n = rows.size();
        std::size_t counts[3];
        double remainders[3];
        std::size_t assigned = 0;
        for (int s = 0; s < 3; ++s) {
            double exact = fracs[s] * static_cast<double>(n);
            counts[s] = static_cast<std::size_t>(exact);
            remainders[s] = exact - static_cast<double>(counts[s]);
            assigned += counts[s];
        }
        while (assigned < n) {
            int pick = 0;
            for (int s = 1; s < 3; ++s)
                if (remainders[s] > remainders[pick]) pick = s;
            ++counts[pick];
            remainders[pick] = -1.0;
            ++assigned;
        }
        std::size_t idx = 0;
        for (int s = 0; s < 3; ++s)
            for (std::size_t k = 0; k < counts[s]; ++k) assignment[rows[idx++]] = s;
    }

    TaskDataset out;
    out.task_id = task_id;
    out.num_classes = num_classes;
    SplitData* splits[3] = {&out.train, &out.dev, &out.test};
    for (int s = 0; s < 3; ++s) {
        std::size_t rows = 0;
        for (std::size_t i = 0; i < data.size(); ++i)
            if (assignment[i] == s) ++rows;
        splits[s]->x = Matrix(rows, data.x.cols());
        splits[s]->y.resize(rows);
        std::size_t w = 0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (assignment[i] != s) continue;
            for (std::size_t j = 0; j < data.x.cols(); ++j)
                (*splits[s]).x(w, j) = data.x(i, j);
            (*splits[s]).y[w] = data.y[i];
            ++w;
        }
    }
    out.validate();
    return out;
}

inline void write_task(const TaskDataset& task, const std::string& dir) {
    write_split_csv(task.train, dir + "/" + task.task_id + "_train.csv");
    write_split_csv(task.dev, dir + "/" + task.task_id + "_dev.csv");
    write_split_csv(task.test, dir + "/" + task.task_id + "_test.csv");
}

inline TaskDataset load_task(const std::string& dir, const std::string& task_id,
                             std::uint32_t num_classes) {
    TaskDataset task;
    task.task_id = task_id;
    task.num_classes = num_classes;
    task.train = load_split_csv(dir + "/" + task_id + "_train.csv");
    task.dev = load_split_csv(dir + "/" + task_id + "_dev.csv");
    task.test = load_split_csv(dir + "/" + task_id + "_test.csv");
    task.validate();
    return task;
}

}  // namespace fgb::data
