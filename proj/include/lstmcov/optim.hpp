#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "lstmcov/parameters.hpp"

namespace lstmcov {

/// AdamW with decoupled weight decay and bias-corrected moments.
struct AdamWState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;

    explicit AdamWState(const ParameterStore& store);
};

/// One update from the gradients held in `store`. Throws NumericError naming
/// the first parameter with a non-finite gradient; nothing is modified then.
void adamw_step(ParameterStore& store, AdamWState& state, double lr, double weight_decay);

/// Cosine OneCycle: lr rises from max_lr/initial_div to max_lr over the
/// first warmup fraction of steps, then falls to max_lr/final_div.
struct OneCycle {
    std::size_t total_steps;
    double max_lr = 0.001;
    double warmup_fraction = 0.3;
    double initial_div = 25.0;
    double final_div = 1e4;

    /// Throws ArgumentError for step > total_steps.
    double lr(std::size_t step) const;
};

} // namespace lstmcov
