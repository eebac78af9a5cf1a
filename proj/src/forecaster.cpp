#include "lstmcov/forecaster.hpp"

#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "lstmcov/errors.hpp"

namespace lstmcov {

std::string_view to_string(ModelKind kind) { return kind == ModelKind::base_lstm ? "base_lstm" : "seg_lstm"; }

ModelKind parse_model_kind(std::string_view text) {
    if (text == "base_lstm" || text == "base-lstm" || text == "base") return ModelKind::base_lstm;
    if (text == "seg_lstm" || text == "seg-lstm" || text == "seg") return ModelKind::seg_lstm;
    throw ConfigError("unknown model kind '" + std::string(text) + "'");
}

ModelConfig ModelConfig::base(std::size_t k_active) {
    ModelConfig c;
    c.kind = ModelKind::base_lstm;
    c.k_active = k_active;
    c.include_log_scale_feature = true;
    return c;
}

ModelConfig ModelConfig::seg(std::size_t k_active, std::size_t segment_length) {
    ModelConfig c;
    c.kind = ModelKind::seg_lstm;
    c.k_active = k_active;
    c.segment_length = segment_length;
    c.include_log_scale_feature = false;
    return c;
}

std::size_t ModelConfig::input_features() const noexcept {
    if (kind == ModelKind::seg_lstm) return segment_length * channels();
    return channels() + (include_log_scale_feature ? 1 : 0);
}

void ModelConfig::validate(std::size_t context_length) const {
    if (hidden < 1 || layers < 1) throw ConfigError("hidden size and layer count must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
    if (kind == ModelKind::seg_lstm) {
        if (segment_length < 1) throw ConfigError("segment length must be >= 1");
        if (include_log_scale_feature) throw ConfigError("seg-lstm does not take the log(scale) feature");
        if (context_length % segment_length != 0)
            throw ConfigError("context length " + std::to_string(context_length) +
                              " is not a multiple of segment length " + std::to_string(segment_length));
    }
}

Tensor segment_reshape(const Tensor& window, std::size_t d) {
    if (window.rank() != 3) throw DimensionError("segment_reshape expects [B x C x F], got " + shape_string(window.shape()));
    if (d < 1 || window.dim(1) % d != 0)
        throw ConfigError("length " + std::to_string(window.dim(1)) + " is not a multiple of segment length " +
                          std::to_string(d));
    // Row-major [B x C x F] already stores each run of d steps contiguously.
    return window.reshaped({window.dim(0), window.dim(1) / d, d * window.dim(2)});
}

Forecaster::Forecaster(const ModelConfig& config, Rng& init_rng) : config_(config) {
    config_.validate(config_.kind == ModelKind::seg_lstm ? config_.segment_length : 1);
    lstm_ = LstmStack::create(params_, "lstm", config_.input_features(), config_.hidden, config_.layers, init_rng);
    const double bound = 1.0 / std::sqrt(static_cast<double>(config_.hidden));
    auto uniform = [&](Shape shape) {
        Tensor t(std::move(shape));
        for (auto& v : t.values()) v = init_rng.uniform(-bound, bound);
        return t;
    };
    fc_w_ = params_.add("head.fc.w", uniform({config_.hidden, config_.hidden}));
    fc_b_ = params_.add("head.fc.b", uniform({config_.hidden}));
    out_w_ = params_.add("head.out.w", uniform({config_.output_width(), config_.hidden}));
    out_b_ = params_.add("head.out.b", uniform({config_.output_width()}));
}

Forecaster::Forecaster(const ModelConfig& config, ParameterStore parameters)
    : config_(config), params_(std::move(parameters)) {
    config_.validate(config_.kind == ModelKind::seg_lstm ? config_.segment_length : 1);
    bind();
}

void Forecaster::bind() {
    lstm_ = LstmStack::bind(params_, "lstm", config_.input_features(), config_.hidden, config_.layers);
    fc_w_ = params_.index_of("head.fc.w");
    fc_b_ = params_.index_of("head.fc.b");
    out_w_ = params_.index_of("head.out.w");
    out_b_ = params_.index_of("head.out.b");
    const auto h = config_.hidden;
    const auto o = config_.output_width();
    if (params_.value(fc_w_).shape() != Shape{h, h} || params_.value(fc_b_).shape() != Shape{h} ||
        params_.value(out_w_).shape() != Shape{o, h} || params_.value(out_b_).shape() != Shape{o})
        throw ConfigError("head parameter shapes do not match the model configuration");
}

Forecaster::HeadVars Forecaster::bind_head(ad::Tape& tape) {
    return {tape.parameter(params_, fc_w_), tape.parameter(params_, fc_b_), tape.parameter(params_, out_w_),
            tape.parameter(params_, out_b_)};
}

ad::Var Forecaster::apply_head(const HeadVars& head, ad::Var hidden) {
    auto fc = ad::relu(ad::add(ad::matmul_bt(hidden, head.fc_w), head.fc_b));
    return ad::add(ad::matmul_bt(fc, head.out_w), head.out_b);
}

std::vector<std::size_t> Forecaster::supervised_positions(std::size_t steps) const {
    std::vector<std::size_t> pos;
    if (config_.kind == ModelKind::base_lstm) {
        for (std::size_t t = 0; t + 1 < steps; ++t) pos.push_back(t);
    } else {
        const std::size_t d = config_.segment_length;
        for (std::size_t end = d; end < steps; end += d) pos.push_back(end - 1);
    }
    return pos;
}

namespace {

void check_batch(const ModelConfig& config, const WindowBatch& batch) {
    if (!batch.scaled) throw ContractError("model input batch must be scaled first");
    if (batch.channels() != config.channels())
        throw DimensionError("batch has " + std::to_string(batch.channels()) + " channels, model expects " +
                             std::to_string(config.channels()));
    config.validate(batch.context_length);
}

/// [B x F] rows with log(scale) appended.
Tensor with_log_scale(const Tensor& x, const Tensor& scales, const std::optional<double>& pinned) {
    const std::size_t B = x.dim(0);
    const std::size_t F = x.dim(1);
    Tensor out({B, F + 1});
    for (std::size_t b = 0; b < B; ++b) {
        std::copy_n(x.data() + b * F, F, out.data() + b * (F + 1));
        out[b * (F + 1) + F] = pinned ? *pinned : std::log(scales[b]);
    }
    return out;
}

/// Flattened segment of d steps starting at `first`: [B x d*F].
Tensor segment_rows(const Tensor& seq, std::size_t first, std::size_t d) {
    const std::size_t B = seq.dim(0);
    const std::size_t S = seq.dim(1);
    const std::size_t F = seq.dim(2);
    Tensor out({B, d * F});
    for (std::size_t b = 0; b < B; ++b) std::copy_n(seq.data() + (b * S + first) * F, d * F, out.data() + b * d * F);
    return out;
}

} // namespace

TeacherForcedOutput Forecaster::forward(ad::Tape& tape, const WindowBatch& scaled, const ForwardOptions& options) {
    check_batch(config_, scaled);
    const std::size_t B = scaled.batch_size();
    const std::size_t S = scaled.steps();
    const std::size_t F = scaled.channels();
    TeacherForcedOutput out;
    out.positions = supervised_positions(S);
    if (out.positions.empty()) throw DatasetError("window too short for any supervised position");

    LstmRunner runner(tape, params_, lstm_, B, config_.dropout, options.training, options.rng);
    const auto head = bind_head(tape);
    std::vector<ad::Var> preds;
    if (config_.kind == ModelKind::base_lstm) {
        const std::size_t last = out.positions.back();
        for (std::size_t t = 0; t <= last; ++t) {
            Tensor x = step_slice(scaled.inputs, t);
            if (config_.include_log_scale_feature) x = with_log_scale(x, scaled.scales, options.pinned_log_scale);
            preds.push_back(apply_head(head, runner.step(tape.constant(std::move(x)))));
        }
    } else {
        const std::size_t d = config_.segment_length;
        for (const auto end : out.positions)
            preds.push_back(apply_head(head, runner.step(tape.constant(segment_rows(scaled.inputs, end + 1 - d, d)))));
    }
    out.predictions = preds.size() == 1 ? preds.front() : ad::concat(preds, 0);

    const std::size_t P = out.positions.size();
    out.targets = Tensor({P * B, F});
    out.mask = Tensor({P * B, F});
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t c = 0; c < F; ++c) {
                out.targets.at(p * B + b, c) = scaled.targets.at(b, out.positions[p], c);
                out.mask.at(p * B + b, c) = scaled.loss_mask.at(b, out.positions[p], c);
            }
    return out;
}

Tensor Forecaster::predict_teacher_forced(const WindowBatch& scaled, const ForwardOptions& options) {
    ad::Tape tape(false);
    const auto tf = forward(tape, scaled, options);
    const std::size_t B = scaled.batch_size();
    const std::size_t P = tf.positions.size();
    const std::size_t O = config_.output_width();
    const Tensor& v = tf.predictions.value();
    Tensor out({B, P, O});
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t c = 0; c < O; ++c) out.at(b, p, c) = v.at(p * B + b, c) * scaled.scales[b];
    return out;
}

FreeRunResult Forecaster::free_run(const Tensor& contexts, const Tensor& scales, std::size_t horizon) {
    if (horizon < 1) throw ArgumentError("free-run horizon must be >= 1");
    if (contexts.rank() != 3) throw DimensionError("free_run expects [B x C x F], got " + shape_string(contexts.shape()));
    const std::size_t B = contexts.dim(0);
    const std::size_t C = contexts.dim(1);
    const std::size_t F = contexts.dim(2);
    if (F != config_.channels())
        throw DimensionError("context has " + std::to_string(F) + " channels, model expects " +
                             std::to_string(config_.channels()));
    if (scales.size() != B) throw DimensionError("one scale per window required");
    config_.validate(C);

    FreeRunResult result;
    result.scaled = Tensor({B, horizon, F});
    LstmStateValues state;
    bool have_state = false;

    // One tape per recurrent step keeps memory flat over long horizons.
    auto advance = [&](Tensor x) -> Tensor {
        ad::Tape tape(false);
        LstmRunner runner(tape, params_, lstm_, B, 0.0, false, nullptr, have_state ? &state : nullptr);
        const auto head = bind_head(tape);
        auto pred = apply_head(head, runner.step(tape.constant(std::move(x))));
        state = runner.state_values();
        have_state = true;
        ++result.recurrent_steps;
        return pred.value();
    };
    auto store = [&](std::size_t i, const Tensor& pred) {
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t c = 0; c < F; ++c) result.scaled.at(b, i, c) = pred.at(b, c);
    };

    Tensor pred;
    if (config_.kind == ModelKind::base_lstm) {
        auto input = [&](Tensor x) {
            return config_.include_log_scale_feature ? with_log_scale(x, scales, std::nullopt) : x;
        };
        for (std::size_t t = 0; t < C; ++t) pred = advance(input(step_slice(contexts, t)));
        store(0, pred);
        for (std::size_t i = 1; i < horizon; ++i) {
            pred = advance(input(pred));
            store(i, pred);
        }
    } else {
        const std::size_t d = config_.segment_length;
        for (std::size_t s = 0; s < C / d; ++s) pred = advance(segment_rows(contexts, s * d, d));
        store(0, pred);
        // Rolling d-step window: drop the oldest vector, append the newest prediction.
        Tensor window = segment_rows(contexts, C - d, d);
        for (std::size_t i = 1; i < horizon; ++i) {
            for (std::size_t b = 0; b < B; ++b) {
                double* row = window.data() + b * d * F;
                std::copy(row + F, row + d * F, row);
                std::copy_n(pred.data() + b * F, F, row + (d - 1) * F);
            }
            pred = advance(window);
            store(i, pred);
        }
    }
    result.original = inverse_scale(result.scaled, scales);
    return result;
}

FreeRunResult Forecaster::forecast(const WindowBatch& scaled, std::size_t horizon) {
    check_batch(config_, scaled);
    const std::size_t B = scaled.batch_size();
    const std::size_t C = scaled.context_length;
    const std::size_t S = scaled.steps();
    const std::size_t F = scaled.channels();
    Tensor contexts({B, C, F});
    for (std::size_t b = 0; b < B; ++b) std::copy_n(scaled.inputs.data() + b * S * F, C * F, contexts.data() + b * C * F);
    return free_run(contexts, scaled.scales, horizon);
}

void Forecaster::save(std::ostream& out) const {
    out << "lstmcov-checkpoint v1\n";
    out << "config kind=" << to_string(config_.kind) << " hidden=" << config_.hidden << " layers=" << config_.layers
        << " dropout=" << format_hex(config_.dropout) << " k_active=" << config_.k_active
        << " segment_length=" << config_.segment_length
        << " log_scale=" << (config_.include_log_scale_feature ? 1 : 0) << '\n';
    params_.write(out);
}

Forecaster Forecaster::load(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "lstmcov-checkpoint v1") throw ParseError("not a checkpoint file", 1);
    if (!std::getline(in, line) || line.rfind("config ", 0) != 0) throw ParseError("missing config line", 2);
    std::map<std::string, std::string> kv;
    std::istringstream ls(line.substr(7));
    std::string tok;
    while (ls >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw ParseError("bad config entry '" + tok + "'", 2);
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    auto get = [&](const char* key) {
        const auto it = kv.find(key);
        if (it == kv.end()) throw ParseError(std::string("config lacks ") + key, 2);
        return it->second;
    };
    ModelConfig c;
    c.kind = parse_model_kind(get("kind"));
    c.hidden = std::stoul(get("hidden"));
    c.layers = std::stoul(get("layers"));
    c.dropout = parse_hex(get("dropout"));
    c.k_active = std::stoul(get("k_active"));
    c.segment_length = std::stoul(get("segment_length"));
    c.include_log_scale_feature = get("log_scale") == "1";
    return Forecaster(c, ParameterStore::read(in));
}

Tensor free_run_forecast(Forecaster& model, const Tensor& context, std::size_t horizon) {
    if (context.rank() != 2) throw DimensionError("context must be [C x F], got " + shape_string(context.shape()));
    const std::size_t C = context.dim(0);
    const std::size_t F = context.dim(1);
    std::vector<double> ys(C);
    for (std::size_t t = 0; t < C; ++t) ys[t] = context.at(t, 0);
    const double s = window_scale(ys);
    Tensor scaled({1, C, F});
    for (std::size_t i = 0; i < context.size(); ++i) scaled[i] = context[i] / s;
    const auto r = model.free_run(scaled, Tensor({1}, s), horizon);
    return r.original.reshaped({horizon, F});
}

} // namespace lstmcov
