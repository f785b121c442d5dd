// Command-line entry point: run, sweep, oracle-check, export-plots.
#include <chrono>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "escada/config.hpp"
#include "escada/errors.hpp"
#include "escada/oracle_checks.hpp"
#include "escada/runner.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kOracleFailure = 2;
constexpr int kNumericalFailure = 3;

int exit_code_for(const escada::Error& e) {
    switch (e.kind()) {
        case escada::ErrorKind::NumericalFailure:
        case escada::ErrorKind::Saturation:
        case escada::ErrorKind::DegenerateSet: return kNumericalFailure;
        default: return kConfigError;
    }
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw escada::Error(escada::ErrorKind::Config, "cannot open '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw escada::Error(escada::ErrorKind::Config, "'" + path + "' is not valid JSON: " + e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Safe context-aware GP bandit benchmark harness"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(ESCADA_VERSION));

    std::string config_path;
    std::string output_dir;
    int threads = 0;
    auto* run = app.add_subcommand("run", "Run one experiment from a config file");
    run->add_option("-c,--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("-o,--output", output_dir, "Output directory (overrides output_dir)");
    run->add_option("-j,--threads", threads, "Worker threads (overrides threads)")->check(CLI::PositiveNumber);

    std::string grid_path;
    auto* sweep = app.add_subcommand("sweep", "Run the cartesian product of config overrides");
    sweep->add_option("-c,--config", config_path, "Base experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sweep->add_option("-g,--grid", grid_path, "JSON object mapping dotted keys to value lists")
        ->required()
        ->check(CLI::ExistingFile);

    std::string report_path;
    auto* oracle = app.add_subcommand("oracle-check", "Run the brute-force oracle suite");
    oracle->add_option("-c,--config", config_path, "Config supplying kernel, environment and seed");
    oracle->add_option("--json", report_path, "Also write the report as JSON");

    std::string input_dir;
    auto* plots = app.add_subcommand("export-plots", "Write plot-ready CSV series from a run directory");
    plots->add_option("-i,--input", input_dir, "Run directory holding records.csv")->required()->check(CLI::ExistingDirectory);
    plots->add_option("-o,--output", output_dir, "Destination (default: <input>/plots)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        // Bad arguments and unreadable config paths count as config errors.
        app.exit(e);
        return kConfigError;
    }

    try {
        if (*run) {
            nlohmann::json doc = read_json(config_path);
            if (!output_dir.empty()) doc["output_dir"] = output_dir;
            if (threads > 0) doc["threads"] = threads;
            const escada::ExperimentConfig config = escada::config_from_json(doc);
            for (const auto& w : config.warnings) std::cerr << "warning: " << w << '\n';
            const auto start = std::chrono::steady_clock::now();
            const escada::ExperimentResult result = escada::run_experiment(config);
            escada::write_outputs(result, config.output_dir);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            for (const auto& s : result.skipped) std::cerr << "skipped: " << s << '\n';
            std::cout << result.runs.size() << " runs written to " << config.output_dir << " in " << secs << " s\n";
            for (const auto& a : result.aggregate) {
                std::cout << "  " << a.scenario << ' ' << a.policy << ": regret " << a.final_regret.mean << ", hypo "
                          << a.hypo_rate.mean << ", hyper " << a.hyper_rate.mean << '\n';
            }
            return kOk;
        }
        if (*sweep) {
            const int n = escada::run_sweep(read_json(config_path), read_json(grid_path));
            std::cout << n << " sweep configurations completed\n";
            return kOk;
        }
        if (*oracle) {
            escada::ExperimentConfig config =
                config_path.empty() ? escada::default_config() : escada::load_config(config_path);
            const auto start = std::chrono::steady_clock::now();
            const escada::OracleReport report = escada::run_oracle_checks(config);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            std::cout << report.to_text() << "elapsed: " << secs << " s\n";
            if (!report_path.empty()) std::ofstream(report_path) << report.to_json().dump(2) << '\n';
            return report.all_pass() ? kOk : kOracleFailure;
        }
        if (*plots) {
            const std::string out = output_dir.empty() ? input_dir + "/plots" : output_dir;
            escada::export_plots(input_dir, out);
            std::cout << "plot series written to " << out << '\n';
            return kOk;
        }
    } catch (const escada::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumericalFailure;
    }
    return kOk;
}
