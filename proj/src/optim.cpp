#include "lstmcov/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "lstmcov/errors.hpp"

namespace lstmcov {

AdamWState::AdamWState(const ParameterStore& store) {
    m.reserve(store.count());
    v.reserve(store.count());
    for (std::size_t i = 0; i < store.count(); ++i) {
        m.emplace_back(store.value(i).shape());
        v.emplace_back(store.value(i).shape());
    }
}

void adamw_step(ParameterStore& store, AdamWState& state, double lr, double weight_decay) {
    if (state.m.size() != store.count()) throw ContractError("optimizer state does not match the parameter store");
    for (std::size_t p = 0; p < store.count(); ++p) {
        const auto g = store.grad(p).values();
        for (std::size_t i = 0; i < g.size(); ++i)
            if (!std::isfinite(g[i]))
                throw NumericError("non-finite gradient in " + store.name(p) + "[" + std::to_string(i) + "]");
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t p = 0; p < store.count(); ++p) {
        auto theta = store.value(p).values();
        const auto g = store.grad(p).values();
        auto m = state.m[p].values();
        auto v = state.v[p].values();
        for (std::size_t i = 0; i < theta.size(); ++i) {
            theta[i] *= 1.0 - lr * weight_decay;
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            theta[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

double OneCycle::lr(std::size_t step) const {
    if (step > total_steps)
        throw ArgumentError("schedule step " + std::to_string(step) + " outside [0, " + std::to_string(total_steps) + "]");
    const double initial = max_lr / initial_div;
    const double final_lr = max_lr / final_div;
    const double peak = warmup_fraction * static_cast<double>(total_steps);
    const double s = static_cast<double>(step);
    auto cosine = [](double from, double to, double frac) {
        return to + (from - to) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
    };
    if (s <= peak) return peak > 0.0 ? cosine(initial, max_lr, s / peak) : max_lr;
    return cosine(max_lr, final_lr, (s - peak) / (static_cast<double>(total_steps) - peak));
}

} // namespace lstmcov
