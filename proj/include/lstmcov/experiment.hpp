#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lstmcov/metrics.hpp"
#include "lstmcov/trainer.hpp"
#include "lstmcov/tsf.hpp"

namespace lstmcov {

/// Environment variable naming the directory that holds the .tsf files.
inline constexpr const char* data_dir_env = "LSTMCOV_DATA_DIR";

std::string code_version();

/// Monash archive file name for a benchmark dataset, e.g. "hospital_dataset.tsf".
std::string monash_file_name(std::string_view dataset);

/// One grid cell.
struct ExperimentSpec {
    std::string dataset;
    std::string data_path;  // empty: <data dir>/<monash file name>
    ModelKind model = ModelKind::base_lstm;
    std::size_t k = 0;
    std::optional<double> target_pcc;
    std::optional<double> gamma;
    std::vector<std::size_t> skip_set;  // leads, 1-based
    std::uint64_t seed = 1;
    std::optional<std::size_t> context;
    std::optional<std::size_t> horizon;
    std::optional<std::size_t> segment_length;
    std::optional<std::size_t> max_series;  // first N series only
    TrainConfig train = TrainConfig::defaults(ModelKind::base_lstm);

    /// Spec with the model's default TrainConfig and the given seed.
    static ExperimentSpec make(std::string dataset, ModelKind model, std::size_t k, std::uint64_t seed);
    std::size_t k_active() const noexcept { return k - skip_set.size(); }
    /// Throws ConfigError: k>3, k=0 with gamma/pcc/skip, skip outside 1..k, gamma and pcc together, ...
    void validate() const;
};

/// Config documents are JSON. Unknown keys raise ConfigError.
ExperimentSpec parse_experiment_spec(const std::string& json_text);
std::string experiment_spec_json(const ExperimentSpec& spec);

/// 16 hex digits of FNV-1a over the canonical JSON of the spec (data_path excluded).
std::string config_hash(const ExperimentSpec& spec);

/// Dataset constants after applying the spec's overrides.
struct ResolvedShape {
    std::size_t context;
    std::size_t horizon;
    std::size_t segment_length;
};
ResolvedShape resolve_shape(const ExperimentSpec& spec);

/// Partial TrainConfig from a config file, laid over the per-model defaults.
struct TrainOverrides {
    std::optional<double> learning_rate;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> batch_size;
    std::optional<std::size_t> batches_per_epoch;
    std::optional<double> weight_decay;
    std::optional<double> dropout;
    std::optional<std::size_t> early_stopping_patience;

    TrainConfig apply(TrainConfig config) const;
};

/// Cross product of cells. k=0 cells expand over `univariate_seeds`, covariate
/// cells over target_pccs x `covariate_seeds`.
struct GridSpec {
    std::vector<std::string> datasets;
    std::vector<ModelKind> models;
    std::vector<std::size_t> ks{0, 1, 2, 3};
    std::vector<double> target_pccs{1.0, 0.9, 0.5};
    std::vector<std::uint64_t> univariate_seeds{1, 2, 3, 4, 5};
    std::vector<std::uint64_t> covariate_seeds{1};
    /// Shape overrides, max_series and data_path copied into every expanded cell.
    ExperimentSpec base;
    TrainOverrides train;
    /// Explicit extra cells, run as given.
    std::vector<ExperimentSpec> cells;

    std::vector<ExperimentSpec> expand() const;
};

GridSpec parse_grid_spec(const std::string& json_text);

/// One row of the results CSV.
struct ResultRow {
    std::string dataset;
    std::string model;
    std::size_t k = 0;
    std::string skip_set;  // "2;3" or ""
    double gamma = 0.0;
    double mean_pcc = 0.0;  // NaN for k=0
    std::string pcc_label;  // "1.0", "0.9", ...; "" for k=0
    std::uint64_t seed = 0;
    std::size_t context = 0;
    std::size_t horizon = 0;
    std::size_t segment_length = 0;
    double smape = 0.0;
    double mae = 0.0;
    double rmse = 0.0;
    std::size_t n_series = 0;
    std::size_t n_excluded = 0;
    std::size_t n_too_short = 0;
    std::size_t best_epoch = 0;
    double train_seconds = 0.0;
    std::string experiment_id;
    std::string config_hash;
    std::string code_version;
    std::string run_dir;  // relative to the results file

    /// Every column except train_seconds.
    bool same_outcome(const ResultRow& other) const;
};

const std::vector<std::string>& result_columns();
void write_results_header(std::ostream& out);
void write_result_row(std::ostream& out, const ResultRow& row);
/// Throws SchemaError when a required column is missing.
std::vector<ResultRow> read_results(std::istream& in);
std::vector<ResultRow> read_results_file(const std::filesystem::path& path);
/// Sorted by (dataset, model, k, mean_pcc, skip_set, seed, config_hash).
void sort_results(std::vector<ResultRow>& rows);
void write_results_file(const std::filesystem::path& path, std::vector<ResultRow> rows);

/// "cov-2-pearsn-1.0-pl-8-seed-42-skip-1" style label; univariate runs read "uni-pl-<H>-seed-<s>".
std::string experiment_label(std::size_t k_active, const std::string& pcc_label, std::size_t horizon,
                             std::uint64_t seed, const std::vector<std::size_t>& skip_set);

struct RunOptions {
    std::filesystem::path output_dir;  // empty: no artifacts
    std::filesystem::path data_dir;    // empty: $LSTMCOV_DATA_DIR
};

struct RunOutcome {
    ResultRow row;
    MetricsReport metrics;
    FitReport fit;
    bool failed = false;
    std::string error;
};

/// Loads the spec's .tsf with the run policy (missing values reject the file).
std::shared_ptr<const TsfDataset> load_experiment_dataset(const ExperimentSpec& spec, const RunOptions& options);

/// ingest -> augment -> fit -> evaluate -> artifacts. Stage errors are caught
/// and reported in the outcome; a FAILED marker is written to the run directory.
RunOutcome run_experiment(const ExperimentSpec& spec, const TsfDataset& data, const RunOptions& options);
RunOutcome run_experiment(const ExperimentSpec& spec, const RunOptions& options);

struct GridOptions {
    std::filesystem::path output_dir;
    std::filesystem::path data_dir;
    std::size_t parallel = 1;
    bool resume = false;
    /// Pre-loaded datasets keyed by dataset name; others are loaded from disk.
    std::map<std::string, std::shared_ptr<const TsfDataset>> datasets;
    std::ostream* log = nullptr;  // one line per finished cell
};

struct GridOutcome {
    std::vector<ResultRow> rows;  // consolidated and sorted
    std::vector<std::string> failures;
    std::size_t trained = 0;
    std::size_t skipped = 0;
};

/// Writes <output_dir>/results.csv. Completed cells (config_hash present) are
/// skipped when resuming.
GridOutcome run_grid(const GridSpec& grid, const GridOptions& options);

} // namespace lstmcov
