#include <cstdio>
#include <exception>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "driftnet/config.hpp"
#include "driftnet/errors.hpp"
#include "driftnet/report.hpp"
#include "driftnet/runner.hpp"
#include "driftnet/selfcheck.hpp"

namespace {

// Exit codes: 0 ok, 1 config/report error, 2 acceptance/selftest failure, 3 io error.
constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kCheckFailure = 2;
constexpr int kIoError = 3;

std::vector<double> parse_sigma_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stod(item));
    return out;
}

int run_with_config(const std::string& config_path, const std::string& sigma_csv, int workers) {
    driftnet::ExperimentConfig cfg = driftnet::ExperimentConfig::load(config_path);
    if (!sigma_csv.empty()) cfg.sigmas = parse_sigma_list(sigma_csv);
    if (workers > 0) cfg.workers = workers;
    cfg.validate();
    driftnet::run_experiment(cfg);
    std::printf("wrote %s/metrics.csv\n", cfg.output_dir.c_str());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"driftnet: lifelong-learning engine and benchmark harness"};
    app.require_subcommand(1);
    app.fallthrough();

    int workers = 0;
    app.add_option("--workers", workers, "worker threads (default: DRIFTNET_WORKERS or cores)");

    std::string config_path;
    std::string sigma_csv;
    std::string report_dir;
    std::string report_kind;

    CLI::App* cmd_run = app.add_subcommand("run", "run an experiment config");
    cmd_run->fallthrough();
    cmd_run->add_option("config", config_path, "config file")->required();

    CLI::App* cmd_sweep = app.add_subcommand("sweep", "run a config across a noise-level list");
    cmd_sweep->fallthrough();
    cmd_sweep->add_option("config", config_path, "config file")->required();
    cmd_sweep->add_option("--sigma", sigma_csv, "comma-separated noise levels")->required();

    CLI::App* cmd_report = app.add_subcommand("report", "render reports from a results directory");
    cmd_report->add_option("dir", report_dir, "results directory (holding metrics.csv)")
        ->required();
    cmd_report
        ->add_option("--kind", report_kind,
                     "loss-vs-noise | accuracy-vs-tasks | uncertainty-box | "
                     "drift-rate-vs-noise | pc-scatter")
        ->required();

    CLI::App* cmd_selftest = app.add_subcommand("selftest", "run the oracle property suites");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfigError;
    }

    try {
        if (cmd_run->parsed()) return run_with_config(config_path, "", workers);
        if (cmd_sweep->parsed()) return run_with_config(config_path, sigma_csv, workers);
        if (cmd_report->parsed()) {
            driftnet::emit_report(report_dir, report_kind);
            std::printf("wrote report_%s.svg and report_%s.json under %s\n", report_kind.c_str(),
                        report_kind.c_str(), report_dir.c_str());
            return kOk;
        }
        if (cmd_selftest->parsed()) {
            bool all_pass = true;
            for (const driftnet::CheckResult& r : driftnet::run_selfchecks()) {
                std::printf("[%s] %s: %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                            r.detail.c_str());
                all_pass = all_pass && r.pass;
            }
            return all_pass ? kOk : kCheckFailure;
        }
    } catch (const driftnet::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kConfigError;
    } catch (const driftnet::ReportError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kConfigError;
    } catch (const driftnet::IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kIoError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kConfigError;
    }
    return kConfigError;
}
