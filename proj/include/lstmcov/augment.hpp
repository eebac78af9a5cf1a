#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "lstmcov/rng.hpp"
#include "lstmcov/tsf.hpp"

namespace lstmcov {

/// One synthesized leading indicator: values[t] = y[t + lead] + noise, for
/// t in [0, T - lead). Later positions are undefined.
struct CovariateColumn {
    std::size_t lead = 0;
    std::vector<double> values;
    /// Pearson coefficient of (values[t], y[t + lead]); NaN when undefined
    /// (constant aligned target).
    double realized_pcc = 0.0;
};

/// Target series plus its active covariate columns.
struct AugmentedSeries {
    std::string series_id;
    std::vector<double> y;
    std::size_t k = 0;  // leads generated, 1..k
    double gamma = 0.0;
    std::vector<std::size_t> skip_set;     // leads omitted from `columns`
    std::vector<CovariateColumn> columns;  // active leads, ascending
    double mu = 0.0;
    double sigma = 0.0;  // population standard deviation of y

    std::size_t length() const noexcept { return y.size(); }
    /// 1 + number of active covariates.
    std::size_t channels() const noexcept { return 1 + columns.size(); }
    /// Channel 0 is y; channel c > 0 is columns[c - 1]. Second member false when undefined.
    std::pair<double, bool> channel_value(std::size_t channel, std::size_t t) const;

    static AugmentedSeries univariate(std::string id, std::vector<double> y);
};

/// Population mean and standard deviation.
std::pair<double, double> mean_and_std(std::span<const double> y);

/// Pearson correlation. Throws ArgumentError for unequal or < 2 lengths and
/// when either input is constant.
double pearson_cc(std::span<const double> a, std::span<const double> b);

/// x_t^j = y_{t+j} + γ·μ·ε + γ·σ·ε with one ε ~ N(0,1) per (t, j), shared
/// between the two noise terms. ε is drawn lead-major (j = 1..k, then t),
/// including for skipped leads, so the surviving columns are identical to an
/// unskipped generation from the same generator state.
AugmentedSeries synthesize_covariates(std::string series_id, std::span<const double> y, std::size_t k, double gamma,
                                      Rng& rng, const std::vector<std::size_t>& skip_set = {});

/// 0.0, 0.1, ..., 1.9
std::vector<double> gamma_grid();

/// Mean realized PCC over all series and active leads, ignoring undefined ones.
double mean_realized_pcc(const std::vector<AugmentedSeries>& set);

struct AugmentationSpec {
    std::size_t k = 0;
    double gamma = 0.0;
    std::vector<std::size_t> skip_set;
    std::uint64_t seed = 0;
};

/// Synthesizes covariates for every series from one generator seeded with
/// `spec.seed`, in record order.
std::vector<AugmentedSeries> augment_dataset(const std::vector<TimeSeriesRecord>& records,
                                             const AugmentationSpec& spec);

struct GammaSweepPoint {
    double gamma;
    double mean_pcc;
};

/// Mean realized PCC for each grid γ. Every γ reuses the same seed so the
/// noise draws are common across the sweep.
std::vector<GammaSweepPoint> gamma_sweep(const std::vector<TimeSeriesRecord>& records, std::size_t k,
                                         std::uint64_t seed, const std::vector<std::size_t>& skip_set = {});

/// Grid γ whose mean realized PCC is closest to `target_pcc`, ties toward the smaller γ.
GammaSweepPoint gamma_for_target_pcc(const std::vector<TimeSeriesRecord>& records, std::size_t k, double target_pcc,
                                     std::uint64_t seed, const std::vector<std::size_t>& skip_set = {});

/// Augmented-dataset cache. Layout:
///
///   # lstmcov augmented dataset v1
///   @series <id> <gamma> <seed> <k> <skip leads joined by ';' or '-'> <active leads or '-'>
///   <t> <y_t> <x_t for each active lead, '?' when undefined>
///   ...
///   @end
///
/// t is 1-based; reals are hexadecimal floats so reloads are bit-exact.
void write_augmented(std::ostream& out, const std::vector<AugmentedSeries>& set, std::uint64_t seed);
std::vector<AugmentedSeries> read_augmented(std::istream& in);

} // namespace lstmcov
