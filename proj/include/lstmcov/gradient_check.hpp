#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lstmcov/autodiff.hpp"

namespace lstmcov {

/// Builds a scalar loss from the current parameter values. Must be
/// deterministic (dropout off) so repeated evaluations agree.
using LossBuilder = std::function<ad::Var(ad::Tape&, ParameterStore&)>;

struct GradCheckOptions {
    double step = 1e-5;
    double tolerance = 1e-4;
    /// 0 checks every scalar; otherwise a seeded sample of this many, with
    /// every parameter tensor represented at least once.
    std::size_t sample_size = 0;
    std::uint64_t seed = 0;
    /// Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps
    /// near-zero gradients from turning round-off into huge ratios.
    double denominator_floor = 1e-6;
};

struct GradCheckEntry {
    std::size_t flat_index;
    std::string name;
    double analytic;
    double numeric;
    double relative_error;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_relative_error = 0.0;
    std::string worst_parameter;
    bool passed = false;
};

/// Compares backward() gradients with central differences
/// (f(θ+h) - f(θ-h)) / 2h. Parameter values are restored afterwards.
/// Throws NumericError naming the parameter if an analytic gradient is non-finite.
GradCheckReport gradient_check(const LossBuilder& f, ParameterStore& store, const GradCheckOptions& options = {});

} // namespace lstmcov
