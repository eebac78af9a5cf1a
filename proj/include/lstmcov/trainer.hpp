#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lstmcov/forecaster.hpp"
#include "lstmcov/optim.hpp"

namespace lstmcov {

struct TrainConfig {
    double learning_rate = 0.001;
    std::size_t epochs = 100;
    std::size_t batch_size = 128;
    std::size_t batches_per_epoch = 200;
    double weight_decay = 1e-8;
    double dropout = 0.1;
    std::size_t early_stopping_patience = 30;
    std::uint64_t seed = 1;

    /// batches_per_epoch is 200 for base-lstm and 500 for seg-lstm.
    static TrainConfig defaults(ModelKind kind);
    /// Throws ConfigError unless every field is positive (dropout may be 0).
    void validate() const;
};

struct EpochRecord {
    std::size_t epoch;  // 1-based
    double train_loss;
    double val_loss;
    double lr;          // at the end of the epoch
    double seconds;
};

struct FitReport {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;  // 0: initial parameters were kept
    double best_val_loss = 0.0;
    bool stopped_early = false;
    bool failed = false;
    std::string failure;
    double seconds = 0.0;

    /// epoch,train_loss,val_loss,lr,seconds
    void write_csv(std::ostream& out) const;
};

struct FitResult {
    ParameterStore best;
    FitReport report;
};

/// Free-running SmoothL1 over the H validation steps of one window per
/// series, all channels, scaled space, masked where truth is undefined.
double validate(Forecaster& model, const ForecastDataset& dataset, std::size_t context, std::size_t horizon);

/// Same loss for an arbitrary split's windows.
double free_run_loss(Forecaster& model, const WindowBatch& raw_windows);

/// Teacher-forced SmoothL1 on one scaled batch; accumulates gradients when
/// `backward` is set.
double training_loss(Forecaster& model, const WindowBatch& scaled, bool training, Rng* rng, bool backward);

/// Trains in place. On return the model holds the best-validation parameters.
FitResult fit(Forecaster& model, const ForecastDataset& dataset, std::size_t context, std::size_t horizon,
              const TrainConfig& config);

} // namespace lstmcov
