#include "lstmcov/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lstmcov/errors.hpp"

namespace lstmcov {
namespace {

std::vector<std::size_t> choose_indices(const ParameterStore& store, const GradCheckOptions& o) {
    const std::size_t total = store.scalar_count();
    std::vector<std::size_t> all(total);
    std::iota(all.begin(), all.end(), std::size_t{0});
    if (o.sample_size == 0 || o.sample_size >= total) return all;

    Rng rng(o.seed);
    std::vector<std::size_t> chosen;
    std::size_t start = 0;
    for (std::size_t p = 0; p < store.count(); ++p) {
        const std::size_t n = store.value(p).size();
        chosen.push_back(start + rng.index(n));
        start += n;
    }
    // Partial Fisher-Yates over the remainder.
    for (std::size_t i = 0; i < total && chosen.size() < o.sample_size; ++i) {
        const std::size_t j = i + rng.index(total - i);
        std::swap(all[i], all[j]);
        if (std::find(chosen.begin(), chosen.end(), all[i]) == chosen.end()) chosen.push_back(all[i]);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

double evaluate(const LossBuilder& f, ParameterStore& store) {
    ad::Tape tape(false);
    return f(tape, store).value().item();
}

} // namespace

GradCheckReport gradient_check(const LossBuilder& f, ParameterStore& store, const GradCheckOptions& o) {
    store.zero_grad();
    {
        ad::Tape tape(true);
        auto loss = f(tape, store);
        tape.backward(loss);
    }
    for (std::size_t k = 0; k < store.scalar_count(); ++k)
        if (!std::isfinite(store.flat_grad(k)))
            throw NumericError("non-finite gradient for parameter " + store.flat_name(k));

    GradCheckReport report;
    for (const auto k : choose_indices(store, o)) {
        const double original = store.flat_value(k);
        store.set_flat_value(k, original + o.step);
        const double up = evaluate(f, store);
        store.set_flat_value(k, original - o.step);
        const double down = evaluate(f, store);
        store.set_flat_value(k, original);

        const double numeric = (up - down) / (2.0 * o.step);
        const double analytic = store.flat_grad(k);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), o.denominator_floor});
        const double rel = std::abs(analytic - numeric) / denom;
        report.entries.push_back({k, store.flat_name(k), analytic, numeric, rel});
        if (report.worst_parameter.empty() || rel > report.max_relative_error) {
            report.max_relative_error = rel;
            report.worst_parameter = store.flat_name(k);
        }
    }
    report.passed = report.max_relative_error < o.tolerance;
    return report;
}

} // namespace lstmcov
