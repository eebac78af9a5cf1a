#include "lstmcov/windows.hpp"

#include <algorithm>
#include <cmath>

#include "lstmcov/errors.hpp"

namespace lstmcov {

std::size_t ForecastDataset::channels() const {
    if (series.empty()) throw DatasetError("dataset '" + name + "' has no series");
    const std::size_t c = series.front().channels();
    for (const auto& s : series)
        if (s.channels() != c) throw DatasetError("series '" + s.series_id + "' has a different channel count");
    return c;
}

SplitSpec chronological_split(std::size_t length, std::size_t horizon) {
    if (horizon < 1) throw ArgumentError("horizon must be >= 1");
    if (length <= 2 * horizon)
        throw DatasetError("series of length " + std::to_string(length) + " cannot hold two horizons of " +
                           std::to_string(horizon) + " plus training data");
    return {length - 2 * horizon, length - horizon, length};
}

std::size_t training_window_count(std::size_t length, std::size_t context, std::size_t horizon) {
    if (length <= 2 * horizon) return 0;
    const std::size_t region = length - 2 * horizon;
    const std::size_t span = context + horizon;
    return region >= span ? region - span + 1 : 0;
}

WindowBatch make_windows(const ForecastDataset& dataset, std::span<const std::size_t> series_index,
                         std::span<const std::size_t> ends, std::size_t context, std::size_t horizon) {
    if (series_index.size() != ends.size()) throw ArgumentError("make_windows: index/end counts differ");
    if (context < 1 || horizon < 1) throw ArgumentError("context and horizon must be >= 1");
    const std::size_t B = series_index.size();
    const std::size_t S = context + horizon;
    const std::size_t F = dataset.channels();
    WindowBatch w;
    w.context_length = context;
    w.horizon = horizon;
    w.inputs = Tensor({B, S, F});
    w.targets = Tensor({B, S, F});
    w.loss_mask = Tensor({B, S, F});
    w.scales = Tensor({B}, 1.0);
    w.series_index.assign(series_index.begin(), series_index.end());
    w.window_end.assign(ends.begin(), ends.end());
    for (std::size_t b = 0; b < B; ++b) {
        const auto& s = dataset.series.at(series_index[b]);
        if (ends[b] > s.length() || ends[b] < S)
            throw DatasetError("window ending at " + std::to_string(ends[b]) + " does not fit series '" + s.series_id +
                               "'");
        const std::size_t start = ends[b] - S;
        for (std::size_t t = 0; t < S; ++t) {
            for (std::size_t c = 0; c < F; ++c) {
                const auto [v, defined] = s.channel_value(c, start + t);
                if (defined) w.inputs.at(b, t, c) = v;
                if (t + 1 < S) {
                    const auto [nv, ndef] = s.channel_value(c, start + t + 1);
                    if (ndef) {
                        w.targets.at(b, t, c) = nv;
                        w.loss_mask.at(b, t, c) = 1.0;
                    }
                }
            }
        }
    }
    return w;
}

TrainingWindowSampler::TrainingWindowSampler(const ForecastDataset& dataset, std::size_t context,
                                             std::size_t horizon)
    : dataset_(&dataset), context_(context), horizon_(horizon) {
    for (std::size_t i = 0; i < dataset.series.size(); ++i) {
        const auto n = training_window_count(dataset.series[i].length(), context, horizon);
        if (n == 0) continue;
        series_.push_back(i);
        total_ += n;
        cumulative_.push_back(total_);
    }
    if (total_ == 0)
        throw DatasetError("dataset '" + dataset.name + "' has no training windows for C=" + std::to_string(context) +
                           ", H=" + std::to_string(horizon));
}

WindowBatch TrainingWindowSampler::sample(std::size_t batch_size, Rng& rng) const {
    if (batch_size < 1) throw ArgumentError("batch size must be >= 1");
    std::vector<std::size_t> idx(batch_size);
    std::vector<std::size_t> ends(batch_size);
    const std::size_t span = context_ + horizon_;
    for (std::size_t b = 0; b < batch_size; ++b) {
        const std::size_t draw = rng.index(total_);
        const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), draw);
        const auto pos = static_cast<std::size_t>(it - cumulative_.begin());
        const std::size_t offset = draw - (pos == 0 ? 0 : cumulative_[pos - 1]);
        idx[b] = series_[pos];
        ends[b] = offset + span;
    }
    return make_windows(*dataset_, idx, ends, context_, horizon_);
}

WindowBatch sample_training_batch(const ForecastDataset& dataset, std::size_t context, std::size_t horizon,
                                  std::size_t batch_size, Rng& rng) {
    return TrainingWindowSampler(dataset, context, horizon).sample(batch_size, rng);
}

EvaluationWindows evaluation_windows(const ForecastDataset& dataset, std::size_t context, std::size_t horizon,
                                     Split split) {
    EvaluationWindows ev;
    std::vector<std::size_t> idx;
    std::vector<std::size_t> ends;
    const std::size_t span = context + horizon;
    for (std::size_t i = 0; i < dataset.series.size(); ++i) {
        const std::size_t T = dataset.series[i].length();
        const std::size_t end = split == Split::test ? T : (T > horizon ? T - horizon : 0);
        if (T <= 2 * horizon || end < span) {
            ev.skipped.push_back(dataset.series[i].series_id);
            continue;
        }
        idx.push_back(i);
        ends.push_back(end);
    }
    if (idx.empty()) throw DatasetError("no series in '" + dataset.name + "' can supply an evaluation window");
    ev.batch = make_windows(dataset, idx, ends, context, horizon);
    return ev;
}

double window_scale(std::span<const double> context_targets) {
    if (context_targets.empty()) throw ArgumentError("window_scale of an empty context");
    double s = 0.0;
    for (double v : context_targets) s += std::abs(v);
    return std::max(s / static_cast<double>(context_targets.size()), 1.0);
}

WindowBatch scale_batch(const WindowBatch& batch) {
    if (batch.scaled) throw ContractError("batch is already scaled");
    WindowBatch out = batch;
    const std::size_t B = batch.batch_size();
    const std::size_t S = batch.steps();
    const std::size_t F = batch.channels();
    std::vector<double> ctx(batch.context_length);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t t = 0; t < batch.context_length; ++t) ctx[t] = batch.inputs.at(b, t, 0);
        const double s = window_scale(ctx);
        out.scales[b] = s;
        for (std::size_t t = 0; t < S; ++t)
            for (std::size_t c = 0; c < F; ++c) {
                out.inputs.at(b, t, c) /= s;
                out.targets.at(b, t, c) /= s;
            }
    }
    out.scaled = true;
    return out;
}

Tensor inverse_scale(const Tensor& values, const Tensor& scales) {
    if (values.rank() < 1 || values.dim(0) != scales.size())
        throw DimensionError("inverse_scale: " + shape_string(values.shape()) + " vs scales " +
                             shape_string(scales.shape()));
    Tensor out = values;
    const std::size_t per = values.size() / std::max<std::size_t>(scales.size(), 1);
    for (std::size_t b = 0; b < scales.size(); ++b)
        for (std::size_t i = 0; i < per; ++i) out[b * per + i] *= scales[b];
    return out;
}

} // namespace lstmcov
