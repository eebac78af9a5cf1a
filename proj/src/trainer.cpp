#include "lstmcov/trainer.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "lstmcov/errors.hpp"

namespace lstmcov {

TrainConfig TrainConfig::defaults(ModelKind kind) {
    TrainConfig c;
    c.batches_per_epoch = kind == ModelKind::seg_lstm ? 500 : 200;
    return c;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (epochs < 1 || batch_size < 1 || batches_per_epoch < 1 || early_stopping_patience < 1)
        throw ConfigError("epochs, batch_size, batches_per_epoch and patience must be >= 1");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
}

void FitReport::write_csv(std::ostream& out) const {
    out << "epoch,train_loss,val_loss,lr,seconds\n";
    const auto old = out.precision(17);
    for (const auto& e : epochs)
        out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.lr << ',' << e.seconds << '\n';
    out.precision(old);
}

double free_run_loss(Forecaster& model, const WindowBatch& raw_windows) {
    const WindowBatch scaled = raw_windows.scaled ? raw_windows : scale_batch(raw_windows);
    const std::size_t B = scaled.batch_size();
    const std::size_t C = scaled.context_length;
    const std::size_t H = scaled.horizon;
    const std::size_t F = scaled.channels();
    const auto run = model.forecast(scaled, H);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t c = 0; c < F; ++c) {
                // targets[t] = inputs[t + 1], so step C + i is target C + i - 1.
                if (scaled.loss_mask.at(b, C + i - 1, c) == 0.0) continue;
                total += ad::smooth_l1_term(run.scaled.at(b, i, c) - scaled.targets.at(b, C + i - 1, c));
                ++count;
            }
    if (count == 0) throw DatasetError("validation windows contain no defined targets");
    return total / static_cast<double>(count);
}

double validate(Forecaster& model, const ForecastDataset& dataset, std::size_t context, std::size_t horizon) {
    return free_run_loss(model, evaluation_windows(dataset, context, horizon, Split::validation).batch);
}

double training_loss(Forecaster& model, const WindowBatch& scaled, bool training, Rng* rng, bool backward) {
    ad::Tape tape(backward);
    ForwardOptions opts;
    opts.training = training;
    opts.rng = rng;
    auto out = model.forward(tape, scaled, opts);
    auto loss = ad::smooth_l1(out.predictions, out.targets, out.mask);
    if (backward) tape.backward(loss);
    return loss.value().item();
}

FitResult fit(Forecaster& model, const ForecastDataset& dataset, std::size_t context, std::size_t horizon,
              const TrainConfig& config) {
    config.validate();
    if (config.dropout != model.config().dropout)
        throw ConfigError("train dropout differs from the model's dropout");
    model.config().validate(context);
    using clock = std::chrono::steady_clock;
    const auto started = clock::now();

    TrainingWindowSampler sampler(dataset, context, horizon);
    Rng rng = Rng(config.seed).fork("train");
    ParameterStore& params = model.parameters();
    AdamWState opt(params);
    const OneCycle schedule{config.epochs * config.batches_per_epoch, config.learning_rate};

    FitResult result{params, {}};
    FitReport& report = result.report;
    report.best_val_loss = std::numeric_limits<double>::infinity();
    std::size_t step = 0;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto epoch_start = clock::now();
        double train_total = 0.0;
        try {
            for (std::size_t b = 0; b < config.batches_per_epoch; ++b) {
                const WindowBatch batch = scale_batch(sampler.sample(config.batch_size, rng));
                params.zero_grad();
                train_total += training_loss(model, batch, true, &rng, true);
                adamw_step(params, opt, schedule.lr(step), config.weight_decay);
                ++step;
            }
        } catch (const NumericError& e) {
            report.failed = true;
            report.failure = "epoch " + std::to_string(epoch) + ": " + e.what();
            break;
        }
        const double val = validate(model, dataset, context, horizon);
        report.epochs.push_back({epoch, train_total / static_cast<double>(config.batches_per_epoch), val,
                                 schedule.lr(step), std::chrono::duration<double>(clock::now() - epoch_start).count()});
        if (!std::isfinite(val)) {
            report.failed = true;
            report.failure = "epoch " + std::to_string(epoch) + ": non-finite validation loss";
            break;
        }
        if (val < report.best_val_loss) {
            report.best_val_loss = val;
            report.best_epoch = epoch;
            result.best = params;
        } else if (epoch - report.best_epoch >= config.early_stopping_patience) {
            report.stopped_early = epoch < config.epochs;
            break;
        }
    }
    params = result.best;
    report.seconds = std::chrono::duration<double>(clock::now() - started).count();
    return result;
}

} // namespace lstmcov
