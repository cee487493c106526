#pragma once

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fgb/common.hpp"
#include "fgb/eval/harness.hpp"

namespace fgb::eval {

namespace detail {

inline std::string csv_safe(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return s;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    check(out.good(), "cannot open for writing: " + path);
    out << text;
    check(out.good(), "short write: " + path);
}

}  // namespace detail

constexpr const char* kResultsHeader =
    "task_id,seed,head,dev_accuracy,test_accuracy,boosting_rounds,wall_seconds";

// One row per successful (task, seed, head); failed cells carry no numbers
// and live in the report's failures block instead.
inline std::string render_results_csv(const ComparisonReport& report) {
    std::ostringstream out;
    out << kResultsHeader << "\n";
    for (const SeedResult& r : report.results) {
        if (r.failed) continue;
        for (HeadKind kind : kAllHeadKinds) {
            if (!report.heads.contains(kind)) continue;
            const HeadOutcome& h = r.head(kind);
            out << r.task_id << ',' << r.seed << ',' << head_name(kind) << ','
                << format_double(h.dev_accuracy) << ',' << format_double(h.test_accuracy)
                << ',' << h.boosting_rounds << ',' << format_double(h.wall_seconds)
                << "\n";
        }
    }
    return out.str();
}

inline void write_results_csv(const std::string& path, const ComparisonReport& report) {
    detail::write_text_file(path, render_results_csv(report));
}

namespace detail {

inline void render_wilcoxon_row(std::ostringstream& out, const WilcoxonBlock& block) {
    out << block.population << ',' << (block.valid ? 1 : 0) << ',';
    if (block.valid) {
        out << block.result.n_effective << ',' << format_double(block.result.w_plus)
            << ',' << format_double(block.result.p_value) << ','
            << (block.result.exact ? 1 : 0);
    } else {
        out << "0,,,";
    }
    out << ',' << csv_safe(block.note) << "\n";
}

}  // namespace detail

// Aggregate view: per-(task, head) means, head-vs-head win counts, the two
// Wilcoxon populations, and any failed cells. Carries no wall-clock
// numbers, so identical sweeps render identical bytes.
inline std::string render_report_csv(const ComparisonReport& report) {
    std::ostringstream out;
    out << "# aggregate\n";
    out << "task_id,head,seeds,successes,failures,dev_mean,dev_std,test_mean,test_std\n";
    for (const TaskHeadAggregate& a : report.aggregates) {
        out << a.task_id << ',' << head_name(a.head) << ',' << report.seeds.size() << ','
            << a.successes << ',' << a.failures << ',';
        if (a.successes >= 1) {
            out << format_double(a.dev.mean) << ',' << format_double(a.dev.stddev) << ','
                << format_double(a.test.mean) << ',' << format_double(a.test.stddev);
        } else {
            out << ",,,";
        }
        out << "\n";
    }

    if (report.failures > 0) {
        out << "\n# failures\n";
        out << "task_id,seed,error\n";
        for (const SeedResult& r : report.results) {
            if (!r.failed) continue;
            out << r.task_id << ',' << r.seed << ',' << detail::csv_safe(r.error) << "\n";
        }
    }

    if (!report.wins.empty()) {
        out << "\n# wins\n";
        out << "head_a,head_b,scope,wins,losses,ties\n";
        for (const PairWins& w : report.wins) {
            out << head_name(w.a) << ',' << head_name(w.b) << ",task_means,"
                << w.task_wins << ',' << w.task_losses << ',' << w.task_ties << "\n";
            out << head_name(w.a) << ',' << head_name(w.b) << ",seeds," << w.seed_wins
                << ',' << w.seed_losses << ',' << w.seed_ties << "\n";
        }
    }

    out << "\n# wilcoxon\n";
    out << "population,valid,n_effective,w_plus,p_value,exact,note\n";
    detail::render_wilcoxon_row(out, report.wilcoxon_paired);
    detail::render_wilcoxon_row(out, report.wilcoxon_task_means);
    return out.str();
}

inline void write_report_csv(const std::string& path, const ComparisonReport& report) {
    detail::write_text_file(path, render_report_csv(report));
}

inline std::string render_curve_csv(const std::vector<EpochCurvePoint>& curve) {
    std::ostringstream out;
    out << "epoch,train_loss,mlp_dev_accuracy,standard_gbdt_dev_accuracy,"
           "free_gbdt_dev_accuracy,standard_samples,free_samples\n";
    for (const EpochCurvePoint& pt : curve) {
        out << pt.epoch << ',' << format_double(pt.train_loss) << ','
            << format_double(pt.mlp_dev_accuracy) << ','
            << format_double(pt.standard_dev_accuracy) << ','
            << format_double(pt.free_dev_accuracy) << ',' << pt.standard_samples << ','
            << pt.free_samples << "\n";
    }
    return out.str();
}

inline void write_curve_csv(const std::string& path,
                            const std::vector<EpochCurvePoint>& curve) {
    detail::write_text_file(path, render_curve_csv(curve));
}

inline std::string render_trace_csv(const std::vector<TraceRow>& rows) {
    std::ostringstream out;
    out << "source,epoch,step,sample_id,value\n";
    for (const TraceRow& row : rows) {
        out << row.source << ',' << row.epoch << ',' << row.step << ',' << row.sample_id
            << ',' << format_double(row.value) << "\n";
    }
    return out.str();
}

inline void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
    detail::write_text_file(path, render_trace_csv(rows));
}

// --- results file ingestion (for significance testing on saved sweeps) -----

struct ResultRow {
    std::string task_id;
    std::uint64_t seed = 0;
    std::string head;
    double dev_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::uint32_t boosting_rounds = 0;
    double wall_seconds = 0.0;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cell);
            cell.clear();
        } else {
            cell += c;
        }
    }
    cells.push_back(cell);
    return cells;
}

inline double parse_real(const std::string& cell, const std::string& where) {
    const char* s = cell.c_str();
    char* end = nullptr;
    const double v = std::strtod(s, &end);
    check(end == s + cell.size() && !cell.empty(), where + ": bad number '" + cell + "'");
    return v;
}

inline std::uint64_t parse_unsigned(const std::string& cell, const std::string& where) {
    const char* s = cell.c_str();
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s, &end, 10);
    check(end == s + cell.size() && !cell.empty(),
          where + ": bad unsigned '" + cell + "'");
    return v;
}

}  // namespace detail

inline std::vector<ResultRow> read_results_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check(in.good(), "cannot open for reading: " + path);
    std::string line;
    check(static_cast<bool>(std::getline(in, line)), path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    check(line == kResultsHeader, path + ": unexpected header '" + line + "'");

    std::vector<ResultRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = path + ": line " + std::to_string(lineno);
        const auto cells = detail::split_csv_line(line);
        check(cells.size() == 7, where + ": expected 7 cells, got " +
                                     std::to_string(cells.size()));
        ResultRow row;
        row.task_id = cells[0];
        row.seed = detail::parse_unsigned(cells[1], where);
        row.head = cells[2];
        parse_head_name(row.head);
        row.dev_accuracy = detail::parse_real(cells[3], where);
        row.test_accuracy = detail::parse_real(cells[4], where);
        row.boosting_rounds =
            static_cast<std::uint32_t>(detail::parse_unsigned(cells[5], where));
        row.wall_seconds = detail::parse_real(cells[6], where);
        rows.push_back(std::move(row));
    }
    return rows;
}

// Dev-accuracy differences head_a minus head_b, paired by (task, seed) in
// file order of the pair's first member. Rows lacking a partner are
// rejected: a results file from a failed sweep cell never has half a pair,
// so a dangling row means the file was edited or mixed.
inline std::vector<double> paired_diffs_from_results(const std::vector<ResultRow>& rows,
                                                     const std::string& head_a,
                                                     const std::string& head_b) {
    parse_head_name(head_a);
    parse_head_name(head_b);
    check(head_a != head_b, "paired diffs: heads must differ");
    struct Slot {
        double a = 0.0, b = 0.0;
        bool have_a = false, have_b = false;
    };
    std::vector<std::pair<std::string, Slot>> slots;  // key = task_id \n seed
    for (const ResultRow& row : rows) {
        if (row.head != head_a && row.head != head_b) continue;
        const std::string key = row.task_id + "\n" + std::to_string(row.seed);
        Slot* slot = nullptr;
        for (auto& [k, s] : slots)
            if (k == key) slot = &s;
        if (!slot) {
            slots.emplace_back(key, Slot{});
            slot = &slots.back().second;
        }
        bool& have = row.head == head_a ? slot->have_a : slot->have_b;
        check(!have, "paired diffs: duplicate row for " + row.task_id + " seed " +
                         std::to_string(row.seed) + " head " + row.head);
        have = true;
        (row.head == head_a ? slot->a : slot->b) = row.dev_accuracy;
    }
    std::vector<double> diffs;
    diffs.reserve(slots.size());
    for (const auto& [key, slot] : slots) {
        check(slot.have_a && slot.have_b,
              "paired diffs: unpaired row for key '" + key + "'");
        diffs.push_back(slot.a - slot.b);
    }
    check(!diffs.empty(), "paired diffs: no rows for heads " + head_a + ", " + head_b);
    return diffs;
}

}  // namespace fgb::eval
