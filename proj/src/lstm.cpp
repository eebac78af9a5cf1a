#include "lstmcov/lstm.hpp"

#include <algorithm>
#include <cmath>

#include "lstmcov/errors.hpp"

namespace lstmcov {
namespace {
Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = rng.uniform(-bound, bound);
    return t;
}
std::string layer_name(const std::string& prefix, std::size_t l, const char* what) {
    return prefix + "." + std::to_string(l) + "." + what;
}
} // namespace

LstmStack LstmStack::create(ParameterStore& store, const std::string& prefix, std::size_t input_size,
                            std::size_t hidden, std::size_t layers, Rng& rng) {
    if (input_size < 1 || hidden < 1 || layers < 1) throw ConfigError("LSTM sizes must be >= 1");
    LstmStack stack;
    stack.hidden = hidden;
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t in = l == 0 ? input_size : hidden;
        LstmLayerIndex idx{};
        idx.input_size = in;
        idx.w_ih = store.add(layer_name(prefix, l, "w_ih"), uniform_tensor({4 * hidden, in}, bound, rng));
        idx.w_hh = store.add(layer_name(prefix, l, "w_hh"), uniform_tensor({4 * hidden, hidden}, bound, rng));
        Tensor b_ih = uniform_tensor({4 * hidden}, bound, rng);
        for (std::size_t i = hidden; i < 2 * hidden; ++i) b_ih[i] += 1.0;
        idx.b_ih = store.add(layer_name(prefix, l, "b_ih"), std::move(b_ih));
        idx.b_hh = store.add(layer_name(prefix, l, "b_hh"), uniform_tensor({4 * hidden}, bound, rng));
        stack.layers.push_back(idx);
    }
    return stack;
}

LstmStack LstmStack::bind(const ParameterStore& store, const std::string& prefix, std::size_t input_size,
                          std::size_t hidden, std::size_t layers) {
    LstmStack stack;
    stack.hidden = hidden;
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t in = l == 0 ? input_size : hidden;
        LstmLayerIndex idx{};
        idx.input_size = in;
        idx.w_ih = store.index_of(layer_name(prefix, l, "w_ih"));
        idx.w_hh = store.index_of(layer_name(prefix, l, "w_hh"));
        idx.b_ih = store.index_of(layer_name(prefix, l, "b_ih"));
        idx.b_hh = store.index_of(layer_name(prefix, l, "b_hh"));
        auto expect = [&](std::size_t i, Shape shape) {
            if (store.value(i).shape() != shape)
                throw ConfigError("parameter " + store.name(i) + " has shape " + shape_string(store.value(i).shape()) +
                                  ", expected " + shape_string(shape));
        };
        expect(idx.w_ih, {4 * hidden, in});
        expect(idx.w_hh, {4 * hidden, hidden});
        expect(idx.b_ih, {4 * hidden});
        expect(idx.b_hh, {4 * hidden});
        stack.layers.push_back(idx);
    }
    return stack;
}

LstmRunner::LstmRunner(ad::Tape& tape, ParameterStore& store, const LstmStack& stack, std::size_t batch,
                       double dropout, bool training, Rng* rng, const LstmStateValues* initial)
    : tape_(&tape), stack_(&stack), dropout_(dropout), training_(training), rng_(rng) {
    if (training && dropout > 0.0 && rng == nullptr) throw ContractError("training with dropout needs an Rng");
    if (initial && (initial->h.size() != stack.layers.size() || initial->c.size() != stack.layers.size()))
        throw DimensionError("initial LSTM state has the wrong number of layers");
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
        const auto& idx = stack.layers[l];
        bound_.push_back({tape.parameter(store, idx.w_ih), tape.parameter(store, idx.w_hh),
                          tape.parameter(store, idx.b_ih), tape.parameter(store, idx.b_hh)});
        if (initial) {
            if (initial->h[l].shape() != Shape{batch, stack.hidden} || initial->c[l].shape() != Shape{batch, stack.hidden})
                throw DimensionError("initial LSTM state shape " + shape_string(initial->h[l].shape()));
            state_.h.push_back(tape.constant(initial->h[l]));
            state_.c.push_back(tape.constant(initial->c[l]));
        } else {
            state_.h.push_back(tape.constant(Tensor({batch, stack.hidden})));
            state_.c.push_back(tape.constant(Tensor({batch, stack.hidden})));
        }
    }
}

LstmStateValues LstmRunner::state_values() const {
    LstmStateValues v;
    for (std::size_t l = 0; l < state_.h.size(); ++l) {
        v.h.push_back(state_.h[l].value());
        v.c.push_back(state_.c[l].value());
    }
    return v;
}

ad::Var LstmRunner::step(ad::Var x) {
    const std::size_t h = stack_->hidden;
    ad::Var input = x;
    for (std::size_t l = 0; l < bound_.size(); ++l) {
        const auto& p = bound_[l];
        if (input.shape().size() != 2 || input.shape()[1] != stack_->layers[l].input_size)
            throw DimensionError("LSTM layer " + std::to_string(l) + " expects [B x " +
                                 std::to_string(stack_->layers[l].input_size) + "], got " +
                                 shape_string(input.shape()));
        auto gates = ad::add(ad::add(ad::matmul_bt(input, p.w_ih), p.b_ih),
                             ad::add(ad::matmul_bt(state_.h[l], p.w_hh), p.b_hh));
        auto i = ad::sigmoid(ad::slice(gates, 1, 0, h));
        auto f = ad::sigmoid(ad::slice(gates, 1, h, 2 * h));
        auto g = ad::tanh(ad::slice(gates, 1, 2 * h, 3 * h));
        auto o = ad::sigmoid(ad::slice(gates, 1, 3 * h, 4 * h));
        auto c = ad::add(ad::mul(f, state_.c[l]), ad::mul(i, g));
        auto hn = ad::mul(o, ad::tanh(c));
        state_.c[l] = c;
        state_.h[l] = hn;
        input = hn;
        if (l + 1 < bound_.size() && training_ && dropout_ > 0.0) input = ad::dropout(hn, dropout_, true, *rng_);
    }
    ++steps_;
    return input;
}

Tensor step_slice(const Tensor& sequence, std::size_t step) {
    if (sequence.rank() != 3 || step >= sequence.dim(1))
        throw DimensionError("step " + std::to_string(step) + " of " + shape_string(sequence.shape()));
    const std::size_t B = sequence.dim(0);
    const std::size_t F = sequence.dim(2);
    Tensor out({B, F});
    for (std::size_t b = 0; b < B; ++b)
        std::copy_n(sequence.data() + (b * sequence.dim(1) + step) * F, F, out.data() + b * F);
    return out;
}

LstmSequenceOutput lstm_forward(ad::Tape& tape, ParameterStore& store, const LstmStack& stack, const Tensor& inputs,
                                double dropout, bool training, Rng* rng) {
    if (inputs.rank() != 3) throw DimensionError("lstm_forward expects [B x S x F], got " + shape_string(inputs.shape()));
    LstmRunner runner(tape, store, stack, inputs.dim(0), dropout, training, rng);
    LstmSequenceOutput out;
    for (std::size_t t = 0; t < inputs.dim(1); ++t) out.outputs.push_back(runner.step(tape.constant(step_slice(inputs, t))));
    out.final_state = runner.state();
    return out;
}

} // namespace lstmcov
