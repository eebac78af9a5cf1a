#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lstmcov/forecaster.hpp"

namespace lstmcov {

/// Raw-scale point metrics over equal-length sequences (length >= 1).
double mae(std::span<const double> pred, std::span<const double> actual);
double rmse(std::span<const double> pred, std::span<const double> actual);
/// Percent, in [0, 200]; terms with |pred| + |actual| = 0 contribute 0.
double smape(std::span<const double> pred, std::span<const double> actual);

struct SeriesMetrics {
    std::string series_id;
    double mae;
    double rmse;
    double smape;
};

struct MetricsReport {
    std::vector<SeriesMetrics> series;
    std::vector<std::string> excluded;  // non-finite forecasts
    std::vector<std::string> too_short;
    double mae = 0.0;
    double rmse = 0.0;
    double smape = 0.0;
    std::vector<double> trajectory;  // prefix sMAPE, t = 1..H

    std::size_t evaluated() const noexcept { return series.size(); }
    /// More than 1% of the series had non-finite forecasts.
    bool excluded_too_many() const noexcept;
};

/// preds/actuals are [series x H]. Element t-1 is the mean over series of
/// sMAPE over the first t steps.
std::vector<double> horizon_trajectory(const std::vector<std::vector<double>>& preds,
                                       const std::vector<std::vector<double>>& actuals);

/// Free-runs H steps from the last window of every series and scores ŷ in original units.
MetricsReport evaluate(Forecaster& model, const ForecastDataset& dataset, std::size_t context, std::size_t horizon,
                       Split split = Split::test);

struct Interval {
    double mean;
    double half_width;  // 1.96 * sd / sqrt(n), sample sd
};

Interval confidence_interval_95(std::span<const double> values);

} // namespace lstmcov
