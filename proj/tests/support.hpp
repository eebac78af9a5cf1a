#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lstmcov/experiment.hpp"
#include "lstmcov/windows.hpp"

namespace testing {

using namespace lstmcov;

/// offset + amplitude * sin(2πt/period + phase_i), phase spread evenly over series.
std::vector<TimeSeriesRecord> sine_records(std::size_t series, std::size_t length, double period, double offset,
                                           double amplitude = 1.0);

/// Records with random walks around a positive level.
std::vector<TimeSeriesRecord> random_records(std::size_t series, std::size_t min_len, std::size_t max_len,
                                             std::uint64_t seed);

TsfDataset as_tsf(std::string name, std::vector<TimeSeriesRecord> records, std::size_t horizon,
                  std::size_t seasonality, std::size_t base_context);

ForecastDataset univariate(std::string name, const std::vector<TimeSeriesRecord>& records);
ForecastDataset augmented(std::string name, const std::vector<TimeSeriesRecord>& records, std::size_t k,
                          double gamma, std::uint64_t seed, const std::vector<std::size_t>& skip = {});

/// Surrogate records with the series count, length range, magnitude and
/// seasonality of a benchmark dataset. Electricity is shortened.
std::vector<TimeSeriesRecord> surrogate_records(const std::string& dataset, std::uint64_t seed);

/// Model config for tests: small and dropout-free unless asked.
ModelConfig tiny_config(ModelKind kind, std::size_t k_active, std::size_t d = 1, std::size_t hidden = 6,
                        double dropout = 0.0);

/// Fresh temporary directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& tag);

} // namespace testing
