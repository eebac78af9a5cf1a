#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "lstmcov/augment.hpp"
#include "lstmcov/errors.hpp"
#include "lstmcov/experiment.hpp"
#include "lstmcov/report.hpp"
#include "lstmcov/runtime.hpp"

using namespace lstmcov;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_failure = 1;
constexpr int exit_config = 2;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct IngestArgs {
    std::string path;
    std::size_t min_length = 1;
    std::string missing = "reject_file";
    std::string augment_out;
    std::size_t k = 0;
    double gamma = 0.0;
    std::uint64_t seed = 1;
    std::vector<std::size_t> skip;
    std::size_t horizon = 0, context = 0, segment_length = 0;  // needed for unknown datasets
};

int ingest(const IngestArgs& a) {
    MissingValueAction action;
    if (a.missing == "reject_file") action = MissingValueAction::reject_file;
    else if (a.missing == "reject_series") action = MissingValueAction::reject_series;
    else throw ConfigError("--missing must be reject_file or reject_series");
    std::optional<DatasetConstants> constants;
    if (a.horizon || a.context || a.segment_length) {
        if (!a.horizon || !a.context) throw ConfigError("--horizon and --context go together");
        const std::size_t d = a.segment_length ? a.segment_length : 1;
        constants = DatasetConstants{a.horizon, d, std::max<std::size_t>(1, a.context / a.horizon), a.context};
    }
    const auto data = load_tsf(a.path, DatasetPolicy{a.min_length, action}, constants);
    const auto& m = data.meta;
    std::size_t shortest = 0, longest = 0;
    if (!data.records.empty()) {
        shortest = longest = data.records.front().values.size();
        for (const auto& r : data.records) {
            shortest = std::min(shortest, r.values.size());
            longest = std::max(longest, r.values.size());
        }
    }
    std::cout << "name        " << m.name << '\n'
              << "frequency   " << (m.frequency ? std::string(to_string(*m.frequency)) : "-") << '\n'
              << "series      " << m.series_count << '\n'
              << "length      " << shortest << ".." << longest << '\n'
              << "horizon     " << m.horizon << '\n'
              << "context     " << m.context_length << '\n'
              << "seasonality " << m.seasonality << '\n'
              << "dropped     " << data.dropped.size() << '\n';
    for (const auto& d : data.dropped) std::cout << "  " << d << '\n';
    if (!a.augment_out.empty()) {
        if (a.k == 0) throw ConfigError("--augment-out needs --k >= 1");
        const auto set = augment_dataset(data.records, AugmentationSpec{a.k, a.gamma, a.skip, a.seed});
        std::ofstream out(a.augment_out);
        if (!out) throw std::runtime_error("cannot write " + a.augment_out);
        write_augmented(out, set, a.seed);
        std::cout << "augmented   k=" << a.k << " gamma=" << a.gamma << " mean_pcc=" << mean_realized_pcc(set)
                  << " -> " << a.augment_out << '\n';
    }
    return exit_ok;
}

int run(const std::string& config, const std::string& out_dir, const std::string& data_dir) {
    const auto spec = parse_experiment_spec(read_file(config));
    resolve_shape(spec);
    const auto outcome = run_experiment(spec, RunOptions{out_dir, data_dir});
    if (outcome.failed) {
        std::cerr << "experiment failed: " << outcome.error << '\n';
        return exit_failure;
    }
    write_results_header(std::cout);
    write_result_row(std::cout, outcome.row);
    if (!out_dir.empty()) {
        const auto results = std::filesystem::path(out_dir) / "results.csv";
        std::vector<ResultRow> rows;
        if (std::filesystem::exists(results)) rows = read_results_file(results);
        std::erase_if(rows, [&](const ResultRow& r) { return r.config_hash == outcome.row.config_hash; });
        rows.push_back(outcome.row);
        write_results_file(results, rows);
    }
    return exit_ok;
}

int grid(const std::string& config, const std::string& out_dir, const std::string& data_dir, std::size_t parallel,
         bool resume) {
    const auto spec = parse_grid_spec(read_file(config));
    GridOptions opts;
    opts.output_dir = out_dir;
    opts.data_dir = data_dir;
    opts.parallel = parallel;
    opts.resume = resume;
    opts.log = &std::cerr;
    const auto outcome = run_grid(spec, opts);
    std::cerr << "cells run " << outcome.trained << ", skipped " << outcome.skipped << ", failed "
              << outcome.failures.size() << '\n';
    for (const auto& f : outcome.failures) std::cerr << "FAILED " << f << '\n';
    std::cout << (std::filesystem::path(out_dir) / "results.csv").string() << '\n';
    return outcome.failures.empty() ? exit_ok : exit_failure;
}

int report(const std::string& results, const std::string& out_dir) {
    const auto summary = write_report(results, out_dir);
    for (const auto& f : summary.files) std::cout << f.string() << '\n';
    for (const auto& m : summary.missing_trajectories) std::cerr << "no trajectory for " << m << '\n';
    return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
    tune_allocator();
    CLI::App app{"LSTM forecasting with synthetic leading-indicator covariates"};
    app.require_subcommand(1);

    IngestArgs ingest_args;
    auto* ingest_cmd = app.add_subcommand("ingest", "Parse a .tsf file and summarize it");
    ingest_cmd->add_option("tsf", ingest_args.path, "Monash .tsf file")->required();
    ingest_cmd->add_option("--min-length", ingest_args.min_length, "Drop series shorter than this");
    ingest_cmd->add_option("--missing", ingest_args.missing, "reject_file or reject_series");
    ingest_cmd->add_option("--augment-out", ingest_args.augment_out, "Write synthesized covariates to this file");
    ingest_cmd->add_option("--k", ingest_args.k, "Covariate leads to synthesize");
    ingest_cmd->add_option("--gamma", ingest_args.gamma, "Noise factor");
    ingest_cmd->add_option("--seed", ingest_args.seed, "Generator seed");
    ingest_cmd->add_option("--skip", ingest_args.skip, "Leads to omit (1-based)");
    ingest_cmd->add_option("--horizon", ingest_args.horizon, "Forecast horizon, for files without built-in constants");
    ingest_cmd->add_option("--context", ingest_args.context, "base-lstm context length, same");
    ingest_cmd->add_option("--segment-length", ingest_args.segment_length, "seg-lstm segment length, same");

    std::string config, out_dir, data_dir;
    auto* run_cmd = app.add_subcommand("run", "Run one experiment from a JSON config");
    run_cmd->add_option("config", config, "Experiment config")->required();
    run_cmd->add_option("--out", out_dir, "Artifact directory");
    run_cmd->add_option("--data-dir", data_dir, std::string("Dataset directory (default $") + data_dir_env + ")");

    std::size_t parallel = 1;
    bool resume = false;
    std::string grid_out = "results";
    auto* grid_cmd = app.add_subcommand("grid", "Run an experiment grid");
    grid_cmd->add_option("config", config, "Grid config")->required();
    grid_cmd->add_option("--parallel", parallel, "Worker threads")->check(CLI::PositiveNumber);
    grid_cmd->add_flag("--resume", resume, "Skip cells already in results.csv");
    grid_cmd->add_option("--out", grid_out, "Output directory");
    grid_cmd->add_option("--data-dir", data_dir, std::string("Dataset directory (default $") + data_dir_env + ")");

    std::string results, report_out;
    auto* report_cmd = app.add_subcommand("report", "Comparison tables and plot data from a results file");
    report_cmd->add_option("results", results, "results.csv")->required();
    report_cmd->add_option("--out", report_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    try {
        if (*ingest_cmd) return ingest(ingest_args);
        if (*run_cmd) return run(config, out_dir, data_dir);
        if (*grid_cmd) return grid(config, grid_out, data_dir, parallel, resume);
        if (*report_cmd) return report(results, report_out);
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return exit_config;
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_failure;
    }
    return exit_config;
}
