#include "fedsim/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedsim/config.hpp"
#include "json.hpp"

namespace fedsim {
namespace {

using json = nlohmann::ordered_json;

std::string quote_csv(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) {
        return field;
    }
    std::string quoted = "\"";
    for (char c : field) {
        if (c == '"') {
            quoted += "\"\"";
        } else {
            quoted += c;
        }
    }
    quoted += '"';
    return quoted;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << content;
    if (!out) {
        throw IoError("failed while writing " + path.string());
    }
}

double mean_round_duration(const ExperimentReport& report) {
    if (report.rounds.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (const auto& rec : report.rounds) {
        sum += rec.duration_seconds;
    }
    return sum / static_cast<double>(report.rounds.size());
}

json eval_to_json(const EvalResult& eval) {
    json j;
    j["accuracy"] = eval.metrics.accuracy;
    j["precision"] = eval.metrics.precision;
    j["recall"] = eval.metrics.recall;
    j["f1"] = eval.metrics.f1;
    j["positive_class"] = eval.metrics.positive_class;
    j["per_class_accuracy"] = eval.metrics.per_class_accuracy;
    j["division_by_zero"] = eval.metrics.division_by_zero;
    json confusion = json::array();
    for (Eigen::Index r = 0; r < eval.confusion.counts.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < eval.confusion.counts.cols(); ++c) {
            row.push_back(eval.confusion.counts(r, c));
        }
        confusion.push_back(std::move(row));
    }
    j["confusion"] = std::move(confusion);
    return j;
}

std::string report_json_text(const ExperimentReport& report) {
    json j;
    j["schema_version"] = 1;
    j["config"] = json::parse(config_to_json(report.config));
    j["class_names"] = report.class_names;
    j["aborted"] = report.aborted;
    j["abort_reason"] = report.abort_reason;
    j["best_round"] = report.best_round;
    j["best_val_accuracy"] = report.best_val_accuracy;
    json timing;
    timing["mean_round_duration_s"] = mean_round_duration(report);
    timing["total_wall_s"] = report.total_wall_seconds;
    j["timing"] = std::move(timing);

    json rounds = json::array();
    for (const auto& rec : report.rounds) {
        json r;
        r["round"] = rec.round;
        r["participants"] = rec.participants;
        r["failed"] = rec.failed;
        r["duration_s"] = rec.duration_seconds;
        r["val_accuracy"] = rec.val_accuracy;
        r["val_per_class_accuracy"] = rec.val_per_class_accuracy;
        r["val_precision"] = rec.val_precision;
        r["val_recall"] = rec.val_recall;
        r["val_f1"] = rec.val_f1;
        if (rec.fedmade) {
            json fm;
            fm["clusters"] = rec.fedmade->num_clusters;
            fm["alpha"] = rec.fedmade->alpha;
            fm["beta"] = rec.fedmade->beta;
            fm["cluster_of"] = rec.fedmade->cluster_of;
            fm["residual"] = rec.fedmade->residual;
            fm["fallback_uniform"] = rec.fedmade->fallback_uniform;
            r["fedmade"] = std::move(fm);
        }
        rounds.push_back(std::move(r));
    }
    j["rounds"] = std::move(rounds);

    if (report.best_round > 0) {
        j["test"] = eval_to_json(report.test);
    }
    return j.dump(2) + "\n";
}

std::string rounds_csv_text(const ExperimentReport& report) {
    std::string csv = "round";
    for (const auto& name : report.class_names) {
        csv += ",val_acc_" + quote_csv(name);
    }
    csv += ",val_overall_accuracy,duration_s,clusters,residual\n";
    for (const auto& rec : report.rounds) {
        csv += std::to_string(rec.round);
        for (std::size_t c = 0; c < report.class_names.size(); ++c) {
            csv += ',';
            if (c < rec.val_per_class_accuracy.size()) {
                csv += format_number(rec.val_per_class_accuracy[c]);
            }
        }
        csv += ',' + format_number(rec.val_accuracy);
        csv += ',' + format_number(rec.duration_seconds);
        csv += ',';
        if (rec.fedmade) {
            csv += std::to_string(rec.fedmade->num_clusters);
        }
        csv += ',';
        if (rec.fedmade) {
            csv += format_number(rec.fedmade->residual);
        }
        csv += '\n';
    }
    return csv;
}

std::string final_metrics_csv_text(const ExperimentReport& report) {
    std::string csv = "metric,value\n";
    auto row = [&csv](const std::string& metric, const std::string& value) {
        csv += quote_csv(metric) + ',' + value + '\n';
    };
    row("best_round", std::to_string(report.best_round));
    row("best_val_accuracy", format_number(report.best_val_accuracy));
    if (report.best_round > 0) {
        row("test_accuracy", format_number(report.test.metrics.accuracy));
        row("test_precision", format_number(report.test.metrics.precision));
        row("test_recall", format_number(report.test.metrics.recall));
        row("test_f1", format_number(report.test.metrics.f1));
        for (std::size_t c = 0; c < report.class_names.size(); ++c) {
            double acc = c < report.test.metrics.per_class_accuracy.size()
                             ? report.test.metrics.per_class_accuracy[c]
                             : 0.0;
            row("test_acc_" + report.class_names[c], format_number(acc));
        }
    }
    row("mean_round_duration_s", format_number(mean_round_duration(report)));
    row("total_wall_s", format_number(report.total_wall_seconds));
    row("rounds_completed", std::to_string(report.rounds.size()));
    row("aborted", report.aborted ? "1" : "0");
    return csv;
}

struct RunSummary {
    std::string path;
    std::string name;
    std::string algorithm;
    std::uint64_t seed = 0;
    json data_echo;
    std::vector<std::string> class_names;
    std::vector<double> test_per_class;
    double test_accuracy = 0.0;
    double mean_duration = 0.0;
};

void collect_diff(const json& a, const json& b, const std::string& path,
                  std::vector<std::string>& out) {
    if (a == b) {
        return;
    }
    if (a.is_object() && b.is_object()) {
        for (auto it = a.begin(); it != a.end(); ++it) {
            const std::string child = path.empty() ? it.key() : path + "." + it.key();
            if (!b.contains(it.key())) {
                out.push_back(child + " present in only one run");
            } else {
                collect_diff(it.value(), b.at(it.key()), child, out);
            }
        }
        for (auto it = b.begin(); it != b.end(); ++it) {
            if (!a.contains(it.key())) {
                out.push_back((path.empty() ? it.key() : path + "." + it.key()) +
                              " present in only one run");
            }
        }
        return;
    }
    if (a.is_array() && b.is_array() && a.size() == b.size()) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            collect_diff(a[i], b[i], path + "[" + std::to_string(i) + "]", out);
        }
        return;
    }
    std::string lhs = a.dump();
    std::string rhs = b.dump();
    if (lhs.size() > 40) lhs = lhs.substr(0, 37) + "...";
    if (rhs.size() > 40) rhs = rhs.substr(0, 37) + "...";
    out.push_back(path + ": " + lhs + " vs " + rhs);
}

RunSummary load_summary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open report: " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    json j;
    try {
        j = json::parse(buffer.str());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("report " + path + " is not valid JSON: " + e.what());
    }

    RunSummary run;
    run.path = path;
    try {
        const json& config = j.at("config");
        run.name = config.at("name").get<std::string>();
        run.algorithm = config.at("algorithm").get<std::string>();
        run.seed = config.at("seed").get<std::uint64_t>();
        run.data_echo = config.at("data");
        run.class_names = j.at("class_names").get<std::vector<std::string>>();
        run.mean_duration = j.at("timing").at("mean_round_duration_s").get<double>();
        if (!j.contains("test")) {
            throw ConfigError("report " + path +
                              " has no test metrics (aborted before any round completed?)");
        }
        run.test_accuracy = j.at("test").at("accuracy").get<double>();
        run.test_per_class = j.at("test").at("per_class_accuracy").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("report " + path + " is missing expected fields: " + e.what());
    }
    if (run.test_per_class.size() != run.class_names.size()) {
        throw ConfigError("report " + path + " per-class metrics do not match its class list");
    }
    return run;
}

}  // namespace

std::string format_number(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.10g", value);
    return buffer;
}

void emit_report(const ExperimentReport& report, const std::string& out_dir) {
    std::filesystem::path dir(out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    }
    write_file(dir / "report.json", report_json_text(report));
    write_file(dir / "rounds.csv", rounds_csv_text(report));
    write_file(dir / "final_metrics.csv", final_metrics_csv_text(report));
}

Comparison compare_runs(const std::vector<std::string>& report_paths,
                        const std::string& baseline_name) {
    if (report_paths.size() < 2) {
        throw ConfigError("compare needs at least two reports");
    }
    std::vector<RunSummary> runs;
    runs.reserve(report_paths.size());
    for (const auto& path : report_paths) {
        runs.push_back(load_summary(path));
    }

    std::size_t base_index = runs.size();
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (runs[i].name == baseline_name) {
            base_index = i;
            break;
        }
    }
    if (base_index == runs.size()) {
        std::string available;
        for (const auto& run : runs) {
            if (!available.empty()) available += ", ";
            available += run.name;
        }
        throw ConfigError("baseline '" + baseline_name + "' not found; available runs: " +
                          available);
    }
    const RunSummary& base = runs[base_index];

    for (const auto& run : runs) {
        std::vector<std::string> diffs;
        if (run.seed != base.seed) {
            diffs.push_back("seed: " + std::to_string(run.seed) + " vs " +
                            std::to_string(base.seed));
        }
        collect_diff(run.data_echo, base.data_echo, "data", diffs);
        if (run.class_names != base.class_names) {
            diffs.push_back("class names differ");
        }
        if (!diffs.empty()) {
            std::string summary;
            const std::size_t shown = std::min<std::size_t>(diffs.size(), 8);
            for (std::size_t i = 0; i < shown; ++i) {
                summary += "\n  " + diffs[i];
            }
            if (diffs.size() > shown) {
                summary += "\n  ...";
            }
            throw ConfigError("run '" + run.name + "' was produced from different data than '" +
                              base.name + "'; refusing to compare:" + summary);
        }
    }

    Comparison comparison;
    comparison.baseline = base.name;
    comparison.class_names = base.class_names;
    auto make_row = [&base](const RunSummary& run) {
        ComparisonRow row;
        row.name = run.name;
        row.algorithm = run.algorithm;
        row.accuracy_delta = (run.test_accuracy - base.test_accuracy) * 100.0;
        row.per_class_delta.reserve(run.test_per_class.size());
        for (std::size_t c = 0; c < run.test_per_class.size(); ++c) {
            row.per_class_delta.push_back((run.test_per_class[c] - base.test_per_class[c]) *
                                          100.0);
        }
        row.duration_ratio =
            base.mean_duration > 0.0 ? run.mean_duration / base.mean_duration : 0.0;
        return row;
    };
    comparison.rows.push_back(make_row(base));
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (i != base_index) {
            comparison.rows.push_back(make_row(runs[i]));
        }
    }
    return comparison;
}

std::string render_comparison(const Comparison& comparison) {
    std::string csv = "run,algorithm,overall_delta_pp";
    for (const auto& name : comparison.class_names) {
        csv += ",delta_pp_" + quote_csv(name);
    }
    csv += ",duration_ratio\n";
    for (const auto& row : comparison.rows) {
        csv += quote_csv(row.name) + ',' + quote_csv(row.algorithm);
        csv += ',' + format_number(row.accuracy_delta);
        for (double delta : row.per_class_delta) {
            csv += ',' + format_number(delta);
        }
        csv += ',' + format_number(row.duration_ratio);
        csv += '\n';
    }
    return csv;
}

}  // namespace fedsim
