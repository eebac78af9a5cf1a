#include "support.hpp"

#include <cmath>
#include <numbers>

#include <unistd.h>

#include "lstmcov/augment.hpp"

namespace testing {

std::vector<TimeSeriesRecord> sine_records(std::size_t series, std::size_t length, double period, double offset,
                                           double amplitude) {
    std::vector<TimeSeriesRecord> out;
    for (std::size_t i = 0; i < series; ++i) {
        TimeSeriesRecord r;
        r.series_id = "S" + std::to_string(i + 1);
        r.attribute_values = {r.series_id};
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(series);
        for (std::size_t t = 0; t < length; ++t)
            r.values.push_back(offset + amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period +
                                                             phase));
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<TimeSeriesRecord> random_records(std::size_t series, std::size_t min_len, std::size_t max_len,
                                             std::uint64_t seed) {
    Rng rng(seed);
    std::vector<TimeSeriesRecord> out;
    for (std::size_t i = 0; i < series; ++i) {
        TimeSeriesRecord r;
        r.series_id = "R" + std::to_string(i + 1);
        r.attribute_values = {r.series_id};
        const std::size_t len = min_len + rng.index(max_len - min_len + 1);
        double level = 10.0 + 90.0 * rng.uniform();
        for (std::size_t t = 0; t < len; ++t) {
            level = std::max(0.5, level + rng.normal());
            r.values.push_back(level);
        }
        out.push_back(std::move(r));
    }
    return out;
}

TsfDataset as_tsf(std::string name, std::vector<TimeSeriesRecord> records, std::size_t horizon,
                  std::size_t seasonality, std::size_t base_context) {
    TsfDataset ds;
    ds.meta.name = std::move(name);
    ds.meta.series_count = records.size();
    ds.meta.horizon = horizon;
    ds.meta.seasonality = seasonality;
    ds.meta.context_length = base_context;
    ds.meta.attributes = {{"series_name", AttributeKind::string}};
    ds.records = std::move(records);
    return ds;
}

ForecastDataset univariate(std::string name, const std::vector<TimeSeriesRecord>& records) {
    ForecastDataset ds{std::move(name), {}};
    for (const auto& r : records) ds.series.push_back(AugmentedSeries::univariate(r.series_id, r.values));
    return ds;
}

ForecastDataset augmented(std::string name, const std::vector<TimeSeriesRecord>& records, std::size_t k,
                          double gamma, std::uint64_t seed, const std::vector<std::size_t>& skip) {
    return ForecastDataset{std::move(name), augment_dataset(records, AugmentationSpec{k, gamma, skip, seed})};
}

std::vector<TimeSeriesRecord> surrogate_records(const std::string& dataset, std::uint64_t seed) {
    struct Shape {
        std::size_t series, min_len, max_len;
        double period, level;
    };
    Shape s{};
    if (dataset == "hospital") s = {767, 84, 84, 12, 40};
    else if (dataset == "tourism") s = {366, 91, 333, 12, 5000};
    else if (dataset == "traffic") s = {862, 104, 104, 52, 0.2};
    else s = {321, 2000, 2000, 24, 2500};
    Rng rng(seed);
    std::vector<TimeSeriesRecord> out;
    for (std::size_t i = 0; i < s.series; ++i) {
        TimeSeriesRecord r;
        r.series_id = "T" + std::to_string(i + 1);
        r.attribute_values = {r.series_id};
        const std::size_t len = s.min_len + rng.index(s.max_len - s.min_len + 1);
        const double level = s.level * (0.2 + 1.6 * rng.uniform());
        const double phase = 2.0 * std::numbers::pi * rng.uniform();
        for (std::size_t t = 0; t < len; ++t) {
            const double season = 0.3 * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / s.period + phase);
            r.values.push_back(std::max(0.0, level * (1.0 + season + 0.1 * rng.normal())));
        }
        out.push_back(std::move(r));
    }
    return out;
}

ModelConfig tiny_config(ModelKind kind, std::size_t k_active, std::size_t d, std::size_t hidden, double dropout) {
    ModelConfig c = kind == ModelKind::seg_lstm ? ModelConfig::seg(k_active, d) : ModelConfig::base(k_active);
    c.hidden = hidden;
    c.dropout = dropout;
    return c;
}

std::filesystem::path temp_dir(const std::string& tag) {
    static int counter = 0;
    auto dir = std::filesystem::temp_directory_path() /
               ("lstmcov-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(++counter));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace testing
