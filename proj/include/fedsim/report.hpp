#pragma once

#include <string>
#include <vector>

#include "fedsim/federation.hpp"

namespace fedsim {

// %.10g rendering, used for every CSV cell so reports are byte-reproducible.
std::string format_number(double value);

// Writes report.json, rounds.csv and final_metrics.csv into out_dir, creating
// it if needed. rounds.csv columns: round, validation per-class accuracies,
// overall validation accuracy, duration, cluster count, solver residual (the
// last two stay empty for algorithms without diagnostics).
void emit_report(const ExperimentReport& report, const std::string& out_dir);

struct ComparisonRow {
    std::string name;
    std::string algorithm;
    std::vector<double> per_class_delta;  // test accuracy deltas, percentage points
    double accuracy_delta = 0.0;          // overall, percentage points
    double duration_ratio = 1.0;          // mean round duration vs baseline
};

struct Comparison {
    std::string baseline;
    std::vector<std::string> class_names;
    std::vector<ComparisonRow> rows;  // baseline first, then input order
};

// Loads emitted report.json files and compares each run against the named
// baseline. Refuses runs whose data configuration or seed differ, with a
// summary of what diverged.
Comparison compare_runs(const std::vector<std::string>& report_paths,
                        const std::string& baseline_name);

// CSV table: run, algorithm, overall delta, per-class deltas, duration ratio.
std::string render_comparison(const Comparison& comparison);

}  // namespace fedsim
