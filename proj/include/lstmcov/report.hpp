#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lstmcov/experiment.hpp"

namespace lstmcov {

enum class Metric { smape, mae, rmse };
std::string_view to_string(Metric m);

/// Models of the published benchmark table, in column order.
const std::vector<std::string>& benchmark_models();

/// Published benchmark mean for (dataset, model, metric); model names as in
/// benchmark_models() or "base_lstm"/"seg_lstm". Empty where no value was published.
std::optional<double> benchmark_reference(std::string_view dataset, std::string_view model, Metric metric);

struct CovariateReference {
    double value;
    std::optional<double> ci95;  // k=0 rows only
};

/// Published covariate-table cell. k=0 rows repeat across the pcc columns.
std::optional<CovariateReference> covariate_reference(std::string_view dataset, std::string_view model, Metric metric,
                                                      std::size_t k, double pcc);

struct ReportSummary {
    std::vector<std::filesystem::path> files;
    std::vector<std::string> missing_trajectories;
};

/// Writes benchmark.csv/.txt, covariates.csv, pcc_curve_<model>_k<k>.csv,
/// trajectory_<run>.csv and trajectories.csv into `out_dir`.
ReportSummary write_report(const std::filesystem::path& results_csv, const std::filesystem::path& out_dir);

} // namespace lstmcov
