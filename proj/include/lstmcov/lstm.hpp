#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lstmcov/autodiff.hpp"

namespace lstmcov {

/// Indices of one layer's tensors in a ParameterStore. Weights are
/// [4h x in] and [4h x h]; the 4h axis holds the gate blocks in the order
/// (input, forget, cell, output).
struct LstmLayerIndex {
    std::size_t w_ih;
    std::size_t w_hh;
    std::size_t b_ih;
    std::size_t b_hh;
    std::size_t input_size;
};

struct LstmStack {
    std::size_t hidden = 0;
    std::vector<LstmLayerIndex> layers;

    /// Registers `<prefix>.<l>.{w_ih,w_hh,b_ih,b_hh}`, drawn uniformly from
    /// [-1/sqrt(h), 1/sqrt(h)], with +1 added to the forget block of b_ih.
    static LstmStack create(ParameterStore& store, const std::string& prefix, std::size_t input_size,
                            std::size_t hidden, std::size_t layers, Rng& rng);
    /// Re-binds to an existing store (after loading a checkpoint).
    static LstmStack bind(const ParameterStore& store, const std::string& prefix, std::size_t input_size,
                          std::size_t hidden, std::size_t layers);
};

/// Per-layer hidden and cell states, each [B x h].
struct LstmState {
    std::vector<ad::Var> h;
    std::vector<ad::Var> c;
};

/// Detached copy of an LstmState, for carrying state across tapes.
struct LstmStateValues {
    std::vector<Tensor> h;
    std::vector<Tensor> c;
};

/// Steps a stack one input at a time on a tape, starting from zero state
/// unless `initial` is given.
/// Dropout is applied to every layer's output except the last, in training only.
class LstmRunner {
public:
    LstmRunner(ad::Tape& tape, ParameterStore& store, const LstmStack& stack, std::size_t batch, double dropout,
               bool training, Rng* rng, const LstmStateValues* initial = nullptr);

    /// Consumes x [B x in] and returns the top layer's new hidden state.
    ad::Var step(ad::Var x);
    const LstmState& state() const noexcept { return state_; }
    LstmStateValues state_values() const;
    std::size_t steps_taken() const noexcept { return steps_; }

private:
    struct Bound {
        ad::Var w_ih, w_hh, b_ih, b_hh;
    };
    ad::Tape* tape_;
    const LstmStack* stack_;
    std::vector<Bound> bound_;
    LstmState state_;
    double dropout_;
    bool training_;
    Rng* rng_;
    std::size_t steps_ = 0;
};

struct LstmSequenceOutput {
    std::vector<ad::Var> outputs;  // one [B x h] per step
    LstmState final_state;
};

/// Runs the stack over inputs [B x S x F] from a zero initial state.
LstmSequenceOutput lstm_forward(ad::Tape& tape, ParameterStore& store, const LstmStack& stack, const Tensor& inputs,
                                double dropout = 0.0, bool training = false, Rng* rng = nullptr);

/// Slice [:, step, :] of a [B x S x F] tensor as a [B x F] matrix.
Tensor step_slice(const Tensor& sequence, std::size_t step);

} // namespace lstmcov
