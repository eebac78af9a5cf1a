#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lstmcov/augment.hpp"
#include "lstmcov/rng.hpp"
#include "lstmcov/tensor.hpp"

namespace lstmcov {

/// A dataset ready for windowing: every series carries the same channels.
struct ForecastDataset {
    std::string name;
    std::vector<AugmentedSeries> series;

    /// 1 + active covariates; throws DatasetError if series disagree.
    std::size_t channels() const;
};

/// Chronological split of one series of length T (0-based, end-exclusive):
/// training [0, train_end), validation targets [train_end, val_end), test
/// targets [val_end, test_end). The last H steps are test; validation drops
/// them; training drops the last 2H.
struct SplitSpec {
    std::size_t train_end;
    std::size_t val_end;
    std::size_t test_end;
};

/// Throws DatasetError unless T > 2H.
SplitSpec chronological_split(std::size_t length, std::size_t horizon);

enum class Split { validation, test };

/// Number of complete C+H training windows inside the training region (0 when too short).
std::size_t training_window_count(std::size_t length, std::size_t context, std::size_t horizon);

/// Context+horizon windows of joint vectors z_t = [y_t, x_t^active...].
///
/// inputs/targets/loss_mask are [B x (C+H) x F]. targets[b][t] holds
/// inputs[b][t+1]; the final step and any undefined covariate value are
/// masked out (mask 0, value 0). Undefined input values are 0.
struct WindowBatch {
    std::size_t context_length = 0;
    std::size_t horizon = 0;
    Tensor inputs;
    Tensor targets;
    Tensor loss_mask;
    Tensor scales;  // [B]; all 1 until scale_batch
    bool scaled = false;
    std::vector<std::size_t> series_index;
    std::vector<std::size_t> window_end;  // exclusive end in the source series

    std::size_t batch_size() const { return inputs.empty() ? 0 : inputs.dim(0); }
    std::size_t steps() const { return context_length + horizon; }
    std::size_t channels() const { return inputs.empty() ? 0 : inputs.dim(2); }
};

/// Builds the windows ending (exclusively) at `ends[i]` in series `series_index[i]`.
WindowBatch make_windows(const ForecastDataset& dataset, std::span<const std::size_t> series_index,
                         std::span<const std::size_t> ends, std::size_t context, std::size_t horizon);

/// Uniform sampler over (series, offset) pairs whose C+H span lies inside the
/// training region; draws with replacement.
class TrainingWindowSampler {
public:
    TrainingWindowSampler(const ForecastDataset& dataset, std::size_t context, std::size_t horizon);

    WindowBatch sample(std::size_t batch_size, Rng& rng) const;
    std::size_t window_count() const noexcept { return total_; }
    std::size_t eligible_series() const noexcept { return series_.size(); }

private:
    const ForecastDataset* dataset_;
    std::size_t context_;
    std::size_t horizon_;
    std::vector<std::size_t> series_;      // eligible series
    std::vector<std::size_t> cumulative_;  // window counts, cumulative
    std::size_t total_ = 0;
};

WindowBatch sample_training_batch(const ForecastDataset& dataset, std::size_t context, std::size_t horizon,
                                  std::size_t batch_size, Rng& rng);

struct EvaluationWindows {
    WindowBatch batch;
    std::vector<std::string> skipped;  // series too short for this split
};

/// One window per eligible series, ending at the split's final index.
EvaluationWindows evaluation_windows(const ForecastDataset& dataset, std::size_t context, std::size_t horizon,
                                     Split split);

/// max(mean |y| over the context, 1)
double window_scale(std::span<const double> context_targets);

/// Divides every channel of inputs and targets by the per-window scale
/// computed from the target channel of the first C steps.
WindowBatch scale_batch(const WindowBatch& batch);

/// Multiplies slice b of `values` (leading axis) by scales[b].
Tensor inverse_scale(const Tensor& values, const Tensor& scales);

} // namespace lstmcov
