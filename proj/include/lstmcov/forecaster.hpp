#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "lstmcov/lstm.hpp"
#include "lstmcov/windows.hpp"

namespace lstmcov {

enum class ModelKind { base_lstm, seg_lstm };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

struct ModelConfig {
    ModelKind kind = ModelKind::base_lstm;
    std::size_t hidden = 40;
    std::size_t layers = 2;
    double dropout = 0.1;
    std::size_t k_active = 0;
    std::size_t segment_length = 1;  // d; seg-lstm only
    bool include_log_scale_feature = true;

    static ModelConfig base(std::size_t k_active);
    static ModelConfig seg(std::size_t k_active, std::size_t segment_length);

    /// Width of z_t = [y, x^active...].
    std::size_t channels() const noexcept { return 1 + k_active; }
    std::size_t input_features() const noexcept;
    std::size_t output_width() const noexcept { return channels(); }
    /// Throws ConfigError for inconsistent settings, including C mod d != 0 for seg-lstm.
    void validate(std::size_t context_length) const;
};

struct ForwardOptions {
    bool training = false;
    Rng* rng = nullptr;  // required when training with dropout
    /// Replaces log(scale) in the base-lstm input channel.
    std::optional<double> pinned_log_scale;
};

/// Teacher-forced predictions at the supervised positions. `predictions`
/// is [(P*B) x out] in scaled space, row p*B + b holding the prediction made
/// after input step positions[p] of window b, i.e. for step positions[p] + 1.
struct TeacherForcedOutput {
    ad::Var predictions;
    Tensor targets;
    Tensor mask;
    std::vector<std::size_t> positions;
};

struct FreeRunResult {
    Tensor scaled;    // [B x H x out]
    Tensor original;  // scaled * window scale
    std::size_t recurrent_steps = 0;
};

/// [B x C x F] -> [B x C/d x d*F]; RNN step s sees steps s*d .. s*d+d-1 in order.
Tensor segment_reshape(const Tensor& window, std::size_t segment_length);

/// base-lstm and seg-lstm: 2-layer LSTM, FC(hidden)+ReLU, linear head of
/// width 1 + k_active. Channel 0 of every output is ŷ.
class Forecaster {
public:
    Forecaster(const ModelConfig& config, Rng& init_rng);
    Forecaster(const ModelConfig& config, ParameterStore parameters);

    const ModelConfig& config() const noexcept { return config_; }
    ParameterStore& parameters() noexcept { return params_; }
    const ParameterStore& parameters() const noexcept { return params_; }

    /// Input steps whose one-step-ahead prediction is supervised in a window of `steps` steps.
    std::vector<std::size_t> supervised_positions(std::size_t steps) const;

    TeacherForcedOutput forward(ad::Tape& tape, const WindowBatch& scaled, const ForwardOptions& options = {});

    /// Teacher-forced predictions in original units, [B x P x out].
    Tensor predict_teacher_forced(const WindowBatch& scaled, const ForwardOptions& options = {});

    /// Free-running forecast of `horizon` steps from scaled contexts [B x C x F].
    /// Only the contexts are read; fed-back covariates are the model's own.
    FreeRunResult free_run(const Tensor& scaled_contexts, const Tensor& scales, std::size_t horizon);

    /// Free-run from the context part of a scaled batch.
    FreeRunResult forecast(const WindowBatch& scaled, std::size_t horizon);

    void save(std::ostream& out) const;
    static Forecaster load(std::istream& in);

private:
    struct HeadVars {
        ad::Var fc_w, fc_b, out_w, out_b;
    };
    HeadVars bind_head(ad::Tape& tape);
    static ad::Var apply_head(const HeadVars& head, ad::Var hidden);
    void bind();

    ModelConfig config_;
    ParameterStore params_;
    LstmStack lstm_;
    std::size_t fc_w_ = 0, fc_b_ = 0, out_w_ = 0, out_b_ = 0;
};

/// Single-window convenience: context [C x F] in original units, returns [H x out] in original units.
Tensor free_run_forecast(Forecaster& model, const Tensor& context, std::size_t horizon);

} // namespace lstmcov
