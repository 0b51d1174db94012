#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedsim/config.hpp"
#include "fedsim/federation.hpp"
#include "fedsim/report.hpp"

namespace {

// 2 config, 3 io, 4 numerical, 1 anything else.
int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const fedsim::ConfigError*>(&e) != nullptr) return 2;
    if (dynamic_cast<const fedsim::IoError*>(&e) != nullptr) return 3;
    if (dynamic_cast<const fedsim::NumericalError*>(&e) != nullptr) return 4;
    return 1;
}

int cmd_run(const std::string& config_path, const std::string& out_override) {
    fedsim::ExperimentConfig config = fedsim::load_config(config_path);
    if (!out_override.empty()) {
        config.output_dir = out_override;
    }
    std::printf("%s: algorithm=%s clients=%d rounds=%d seed=%llu\n", config.name.c_str(),
                fedsim::algorithm_name(config.algorithm).c_str(), config.data.num_clients(),
                config.rounds, static_cast<unsigned long long>(config.seed));

    auto progress = [](const fedsim::RoundRecord& rec) {
        std::printf("round %d: val_accuracy=%.4f participants=%zu duration=%.3fs",
                    rec.round, rec.val_accuracy, rec.participants.size(),
                    rec.duration_seconds);
        if (!rec.failed.empty()) {
            std::printf(" failed=%zu", rec.failed.size());
        }
        if (rec.fedmade) {
            std::printf(" clusters=%d residual=%.4g", rec.fedmade->num_clusters,
                        rec.fedmade->residual);
        }
        std::printf("\n");
        std::fflush(stdout);
    };

    fedsim::ExperimentReport report = fedsim::run_experiment(config, nullptr, progress);
    fedsim::emit_report(report, config.output_dir);
    std::printf("report written to %s\n", config.output_dir.c_str());
    if (report.aborted) {
        std::fprintf(stderr, "error: experiment aborted: %s\n", report.abort_reason.c_str());
        return 1;
    }
    std::printf("best round %d: val_accuracy=%.4f test_accuracy=%.4f\n", report.best_round,
                report.best_val_accuracy, report.test.metrics.accuracy);
    return 0;
}

int cmd_validate(const std::string& config_path) {
    fedsim::ExperimentConfig config = fedsim::load_config(config_path);
    std::printf("%s is valid: algorithm=%s clients=%d rounds=%d classes=%d\n",
                config_path.c_str(), fedsim::algorithm_name(config.algorithm).c_str(),
                config.data.num_clients(),
                config.rounds,
                config.data.source == fedsim::DataConfig::Source::Synthetic
                    ? config.data.synthetic.num_classes()
                    : static_cast<int>(config.data.csv_schema.class_names.size()));
    return 0;
}

int cmd_compare(const std::vector<std::string>& report_paths, const std::string& baseline) {
    fedsim::Comparison comparison = fedsim::compare_runs(report_paths, baseline);
    std::fputs(fedsim::render_comparison(comparison).c_str(), stdout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated learning simulator for IoT intrusion detection"};
    app.require_subcommand(1);

    std::string run_config, run_out;
    CLI::App* run = app.add_subcommand("run", "Run an experiment and emit its report");
    run->add_option("config", run_config, "Experiment config file (JSON)")->required();
    run->add_option("--out", run_out, "Override the config's output directory");

    std::string validate_config;
    CLI::App* validate = app.add_subcommand("validate", "Parse and validate a config file");
    validate->add_option("config", validate_config, "Experiment config file (JSON)")->required();

    std::vector<std::string> compare_reports;
    std::string compare_baseline;
    CLI::App* compare =
        app.add_subcommand("compare", "Compare emitted report.json files against a baseline");
    compare->add_option("reports", compare_reports, "Two or more report.json paths")->required();
    compare->add_option("--baseline", compare_baseline, "Name of the baseline run")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            return cmd_run(run_config, run_out);
        }
        if (validate->parsed()) {
            return cmd_validate(validate_config);
        }
        if (compare->parsed()) {
            return cmd_compare(compare_reports, compare_baseline);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e);
    }
    return 1;
}
