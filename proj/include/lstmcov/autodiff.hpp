#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "lstmcov/parameters.hpp"
#include "lstmcov/rng.hpp"
#include "lstmcov/tensor.hpp"

namespace lstmcov::ad {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
public:
    Var() = default;
    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t id() const noexcept { return id_; }
    Tape* tape() const noexcept { return tape_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Computation record for reverse-mode differentiation. Operations are
/// appended in evaluation order; backward() visits each exactly once in
/// reverse. With gradients disabled the tape only stores values.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, std::size_t self)>;

    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    /// Leaf that reads `store.value(index)` in place; backward() adds into
    /// `store.grad(index)`. The store must outlive the tape.
    Var parameter(ParameterStore& store, std::size_t index);

    /// Used by operations. `fn` runs only if some input requires a gradient.
    Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn);

    void backward(Var loss);

    const Tensor& value(std::size_t id) const {
        const Node& n = nodes_[id];
        return n.store ? n.store->value(n.param_index) : n.value;
    }
    const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    /// Gradient buffer of `id`, zero-initialised on first use.
    Tensor& grad_buffer(std::size_t id);
    const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }

    bool grad_enabled() const noexcept { return grad_enabled_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    /// Number of backward functions executed by the last backward() call.
    std::size_t last_backward_visits() const noexcept { return last_visits_; }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        bool requires_grad = false;
        ParameterStore* store = nullptr;
        std::size_t param_index = 0;
    };
    std::vector<Node> nodes_;
    bool grad_enabled_;
    std::size_t last_visits_ = 0;
};

// Linear algebra. All operands 2-D.
Var matmul(Var a, Var b);
/// a * b^T, for weights stored as [out x in].
Var matmul_bt(Var a, Var b);

// Elementwise. `b` may have the trailing shape of `a` and is then broadcast
// over a's leading axes (and symmetrically for add/mul).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);

Var sigmoid(Var x);
Var tanh(Var x);
Var relu(Var x);
/// Inverted dropout: survivors scaled by 1/(1-p). Identity when !training or p == 0.
Var dropout(Var x, double p, bool training, Rng& rng);

Var concat(const std::vector<Var>& parts, std::size_t axis);
Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end);
Var reshape(Var x, Shape shape);

/// Sum of all elements, as a scalar.
Var sum(Var x);

/// Mean over (unmasked) elements of 0.5 r^2 for |r| < 1, |r| - 0.5 otherwise.
/// `mask` entries are 0 or 1. Throws ArgumentError when nothing is selected.
Var smooth_l1(Var pred, const Tensor& target, const std::optional<Tensor>& mask = std::nullopt);

/// Scalar elementwise smooth L1 term, shared with oracles.
double smooth_l1_term(double residual);

} // namespace lstmcov::ad
