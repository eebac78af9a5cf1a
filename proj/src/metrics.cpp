#include "lstmcov/metrics.hpp"

#include <cmath>

#include "lstmcov/errors.hpp"

namespace lstmcov {

namespace {

void check_lengths(std::span<const double> pred, std::span<const double> actual) {
    if (pred.size() != actual.size())
        throw ArgumentError("length mismatch: " + std::to_string(pred.size()) + " vs " + std::to_string(actual.size()));
    if (pred.empty()) throw ArgumentError("metrics need at least one value");
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

} // namespace

double mae(std::span<const double> pred, std::span<const double> actual) {
    check_lengths(pred, actual);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - actual[i]);
    return s / static_cast<double>(pred.size());
}

double rmse(std::span<const double> pred, std::span<const double> actual) {
    check_lengths(pred, actual);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - actual[i]) * (pred[i] - actual[i]);
    return std::sqrt(s / static_cast<double>(pred.size()));
}

double smape(std::span<const double> pred, std::span<const double> actual) {
    check_lengths(pred, actual);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double denom = (std::abs(pred[i]) + std::abs(actual[i])) / 2.0;
        if (denom > 0.0) s += std::abs(pred[i] - actual[i]) / denom;
    }
    return 100.0 * s / static_cast<double>(pred.size());
}

bool MetricsReport::excluded_too_many() const noexcept {
    const std::size_t total = series.size() + excluded.size();
    return total > 0 && 100 * excluded.size() > total;
}

std::vector<double> horizon_trajectory(const std::vector<std::vector<double>>& preds,
                                       const std::vector<std::vector<double>>& actuals) {
    if (preds.size() != actuals.size()) throw ArgumentError("trajectory needs one actual row per prediction row");
    if (preds.empty()) throw ArgumentError("trajectory needs at least one series");
    const std::size_t H = preds.front().size();
    for (std::size_t s = 0; s < preds.size(); ++s)
        if (preds[s].size() != H || actuals[s].size() != H) throw ArgumentError("ragged trajectory input");
    std::vector<double> out(H);
    for (std::size_t t = 1; t <= H; ++t) {
        double total = 0.0;
        for (std::size_t s = 0; s < preds.size(); ++s)
            total += smape(std::span(preds[s]).first(t), std::span(actuals[s]).first(t));
        out[t - 1] = total / static_cast<double>(preds.size());
    }
    return out;
}

MetricsReport evaluate(Forecaster& model, const ForecastDataset& dataset, std::size_t context, std::size_t horizon,
                       Split split) {
    auto windows = evaluation_windows(dataset, context, horizon, split);
    MetricsReport report;
    report.too_short = std::move(windows.skipped);
    const WindowBatch scaled = scale_batch(windows.batch);
    const auto run = model.forecast(scaled, horizon);

    std::vector<std::vector<double>> preds, actuals;
    std::vector<double> maes, rmses, smapes;
    for (std::size_t b = 0; b < scaled.batch_size(); ++b) {
        const auto& series = dataset.series[scaled.series_index[b]];
        std::vector<double> p(horizon), a(horizon);
        bool finite = true;
        for (std::size_t i = 0; i < horizon; ++i) {
            p[i] = run.original.at(b, i, 0);
            a[i] = series.y[scaled.window_end[b] - horizon + i];
            finite = finite && std::isfinite(p[i]);
        }
        if (!finite) {
            report.excluded.push_back(series.series_id);
            continue;
        }
        report.series.push_back({series.series_id, mae(p, a), rmse(p, a), smape(p, a)});
        maes.push_back(report.series.back().mae);
        rmses.push_back(report.series.back().rmse);
        smapes.push_back(report.series.back().smape);
        preds.push_back(std::move(p));
        actuals.push_back(std::move(a));
    }
    if (report.series.empty()) throw NumericError("every forecast in '" + dataset.name + "' is non-finite");
    report.mae = mean_of(maes);
    report.rmse = mean_of(rmses);
    report.smape = mean_of(smapes);
    report.trajectory = horizon_trajectory(preds, actuals);
    return report;
}

Interval confidence_interval_95(std::span<const double> values) {
    if (values.empty()) throw ArgumentError("confidence interval of no values");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    if (values.size() == 1) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    return {mean, 1.96 * sd / std::sqrt(static_cast<double>(values.size()))};
}

} // namespace lstmcov
