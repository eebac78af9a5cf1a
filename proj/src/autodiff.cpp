#include "lstmcov/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "lstmcov/errors.hpp"

namespace lstmcov::ad {

const Tensor& Var::value() const {
    if (!tape_) throw ContractError("use of an unbound Var");
    return tape_->value(id_);
}

Var Tape::constant(Tensor value) {
    Node n;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(ParameterStore& store, std::size_t index) {
    Node n;
    n.requires_grad = grad_enabled_;
    n.store = &store;
    n.param_index = index;
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn) {
    Node n;
    n.value = std::move(value);
    if (grad_enabled_) {
        n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                      [this](std::size_t i) { return nodes_[i].requires_grad; });
        if (n.requires_grad) {
            n.inputs = std::move(inputs);
            n.backward = std::move(fn);
        }
    }
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_buffer(std::size_t id) {
    auto& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor(value(id).shape());
    return n.grad;
}

void Tape::backward(Var loss) {
    if (loss.tape() != this) throw ContractError("backward on a Var from another tape");
    if (!grad_enabled_) throw ContractError("backward on a tape with gradients disabled");
    if (value(loss.id()).size() != 1)
        throw DimensionError("backward needs a scalar loss, got " + shape_string(value(loss.id()).shape()));
    for (auto& n : nodes_) n.grad = Tensor();
    grad_buffer(loss.id()).fill(1.0);
    last_visits_ = 0;
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
        auto& n = nodes_[id];
        if (!n.requires_grad || n.grad.empty()) continue;
        if (n.backward) {
            n.backward(*this, id);
            ++last_visits_;
        } else if (n.store) {
            auto& g = n.store->grad(n.param_index);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
        }
    }
}

namespace {

bool is_suffix(const Shape& small, const Shape& big) {
    if (small.size() > big.size()) return false;
    return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

enum class BinOp { add, sub, mul };

Var binary(Var a, Var b, BinOp op, const char* name) {
    Tape& tape = *a.tape();
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    bool a_big = true;
    if (av.shape() != bv.shape()) {
        if (is_suffix(bv.shape(), av.shape())) a_big = true;
        else if (is_suffix(av.shape(), bv.shape())) a_big = false;
        else
            throw DimensionError(std::string(name) + ": shapes " + shape_string(av.shape()) + " and " +
                                 shape_string(bv.shape()) + " do not broadcast");
    }
    const Tensor& big = a_big ? av : bv;
    const std::size_t total = big.size();
    const std::size_t inner = (a_big ? bv : av).size();
    if (inner == 0) throw DimensionError(std::string(name) + ": empty operand");
    Tensor out(big.shape());
    const double* pa = av.data();
    const double* pb = bv.data();
    const std::size_t ma = av.size();
    const std::size_t mb = bv.size();
    for (std::size_t i = 0; i < total; ++i) {
        const double x = pa[ma == total ? i : i % ma];
        const double y = pb[mb == total ? i : i % mb];
        out[i] = op == BinOp::add ? x + y : op == BinOp::sub ? x - y : x * y;
    }
    const std::size_t ia = a.id();
    const std::size_t ib = b.id();
    return tape.record(std::move(out), {ia, ib}, [ia, ib, op, total](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& av = t.value(ia);
        const Tensor& bv = t.value(ib);
        const std::size_t ma = av.size();
        const std::size_t mb = bv.size();
        if (t.requires_grad(ia)) {
            Tensor& ga = t.grad_buffer(ia);
            for (std::size_t i = 0; i < total; ++i) {
                const double d = op == BinOp::mul ? g[i] * bv[mb == total ? i : i % mb] : g[i];
                ga[ma == total ? i : i % ma] += d;
            }
        }
        if (t.requires_grad(ib)) {
            Tensor& gb = t.grad_buffer(ib);
            for (std::size_t i = 0; i < total; ++i) {
                const double d = op == BinOp::mul   ? g[i] * av[ma == total ? i : i % ma]
                                 : op == BinOp::sub ? -g[i]
                                                    : g[i];
                gb[mb == total ? i : i % mb] += d;
            }
        }
    });
}

template <class F, class D>
Var unary(Var x, F f, D dfdy_from_xy) {
    Tape& tape = *x.tape();
    const Tensor& xv = x.value();
    Tensor out(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
    const std::size_t ix = x.id();
    return tape.record(std::move(out), {ix}, [ix, dfdy_from_xy](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& xv = t.value(ix);
        const Tensor& yv = t.value(self);
        Tensor& gx = t.grad_buffer(ix);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dfdy_from_xy(xv[i], yv[i]);
    });
}

void check_same_tape(Var a, Var b, const char* op) {
    if (!a.valid() || a.tape() != b.tape()) throw ContractError(std::string(op) + ": operands on different tapes");
}

} // namespace

Var matmul(Var a, Var b) {
    check_same_tape(a, b, "matmul");
    Tensor out;
    gemm(a.value(), false, b.value(), false, out, false);
    const std::size_t ia = a.id();
    const std::size_t ib = b.id();
    return a.tape()->record(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        if (t.requires_grad(ia)) gemm(g, false, t.value(ib), true, t.grad_buffer(ia), true);
        if (t.requires_grad(ib)) gemm(t.value(ia), true, g, false, t.grad_buffer(ib), true);
    });
}

Var matmul_bt(Var a, Var b) {
    check_same_tape(a, b, "matmul_bt");
    Tensor out;
    gemm(a.value(), false, b.value(), true, out, false);
    const std::size_t ia = a.id();
    const std::size_t ib = b.id();
    return a.tape()->record(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        if (t.requires_grad(ia)) gemm(g, false, t.value(ib), false, t.grad_buffer(ia), true);
        if (t.requires_grad(ib)) gemm(g, true, t.value(ia), false, t.grad_buffer(ib), true);
    });
}

Var add(Var a, Var b) {
    check_same_tape(a, b, "add");
    return binary(a, b, BinOp::add, "add");
}

Var sub(Var a, Var b) {
    check_same_tape(a, b, "sub");
    return binary(a, b, BinOp::sub, "sub");
}

Var mul(Var a, Var b) {
    check_same_tape(a, b, "mul");
    return binary(a, b, BinOp::mul, "mul");
}

Var scale(Var a, double c) {
    return unary(a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var sigmoid(Var x) {
    return unary(
        x,
        [](double v) {
            if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var x) {
    return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var x) {
    return unary(x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var dropout(Var x, double p, bool training, Rng& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw ArgumentError("dropout probability must be in [0, 1)");
    if (!training || p == 0.0) return x;
    const Tensor& xv = x.value();
    Tensor keep(xv.shape());
    const double survivor = 1.0 / (1.0 - p);
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = rng.bernoulli(p) ? 0.0 : survivor;
    Tensor out(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * keep[i];
    const std::size_t ix = x.id();
    return x.tape()->record(std::move(out), {ix}, [ix, keep = std::move(keep)](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        Tensor& gx = t.grad_buffer(ix);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * keep[i];
    });
}

namespace {
struct AxisSplit {
    std::size_t outer;
    std::size_t inner;
};
AxisSplit split_at(const Shape& s, std::size_t axis) {
    AxisSplit r{1, 1};
    for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
    return r;
}
} // namespace

Var concat(const std::vector<Var>& parts, std::size_t axis) {
    if (parts.empty()) throw ArgumentError("concat of nothing");
    Tape& tape = *parts.front().tape();
    const Shape& first = parts.front().shape();
    if (axis >= first.size()) throw DimensionError("concat axis out of range for " + shape_string(first));
    Shape out_shape = first;
    out_shape[axis] = 0;
    std::vector<std::size_t> ids;
    for (const auto& p : parts) {
        if (p.tape() != &tape) throw ContractError("concat: operands on different tapes");
        const Shape& s = p.shape();
        bool ok = s.size() == first.size();
        for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
        if (!ok) throw DimensionError("concat: " + shape_string(first) + " vs " + shape_string(s));
        out_shape[axis] += s[axis];
        ids.push_back(p.id());
    }
    const auto [outer, inner] = split_at(out_shape, axis);
    const std::size_t row = out_shape[axis] * inner;
    Tensor out(out_shape);
    std::size_t col = 0;
    for (const auto& p : parts) {
        const Tensor& v = p.value();
        const std::size_t chunk = v.shape()[axis] * inner;
        for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(v.data() + o * chunk, chunk, out.data() + o * row + col);
        col += chunk;
    }
    return tape.record(std::move(out), ids, [ids, axis, outer = outer, inner = inner, row](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        std::size_t col = 0;
        for (auto id : ids) {
            const std::size_t chunk = t.value(id).shape()[axis] * inner;
            if (t.requires_grad(id)) {
                Tensor& gi = t.grad_buffer(id);
                for (std::size_t o = 0; o < outer; ++o)
                    for (std::size_t j = 0; j < chunk; ++j) gi[o * chunk + j] += g[o * row + col + j];
            }
            col += chunk;
        }
    });
}

Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end) {
    const Shape& s = x.shape();
    if (axis >= s.size() || begin >= end || end > s[axis])
        throw DimensionError("slice [" + std::to_string(begin) + ", " + std::to_string(end) + ") on axis " +
                             std::to_string(axis) + " of " + shape_string(s));
    const auto [outer, inner] = split_at(s, axis);
    Shape out_shape = s;
    out_shape[axis] = end - begin;
    const std::size_t src_row = s[axis] * inner;
    const std::size_t chunk = (end - begin) * inner;
    const std::size_t offset = begin * inner;
    Tensor out(out_shape);
    const Tensor& v = x.value();
    for (std::size_t o = 0; o < outer; ++o) std::copy_n(v.data() + o * src_row + offset, chunk, out.data() + o * chunk);
    const std::size_t ix = x.id();
    return x.tape()->record(std::move(out), {ix},
                            [ix, outer = outer, src_row, chunk, offset](Tape& t, std::size_t self) {
                                const Tensor& g = t.grad(self);
                                Tensor& gx = t.grad_buffer(ix);
                                for (std::size_t o = 0; o < outer; ++o)
                                    for (std::size_t j = 0; j < chunk; ++j)
                                        gx[o * src_row + offset + j] += g[o * chunk + j];
                            });
}

Var reshape(Var x, Shape shape) {
    Tensor out = x.value().reshaped(std::move(shape));
    const std::size_t ix = x.id();
    return x.tape()->record(std::move(out), {ix}, [ix](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        Tensor& gx = t.grad_buffer(ix);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
}

Var sum(Var x) {
    double s = 0.0;
    for (double v : x.value().values()) s += v;
    const std::size_t ix = x.id();
    return x.tape()->record(Tensor::scalar(s), {ix}, [ix](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0];
        Tensor& gx = t.grad_buffer(ix);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
}

double smooth_l1_term(double r) {
    const double a = std::abs(r);
    return a < 1.0 ? 0.5 * r * r : a - 0.5;
}

Var smooth_l1(Var pred, const Tensor& target, const std::optional<Tensor>& mask) {
    const Tensor& p = pred.value();
    require_same_shape(p, target, "smooth_l1");
    if (mask) require_same_shape(p, *mask, "smooth_l1 mask");
    double total = 0.0;
    double count = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double w = mask ? (*mask)[i] : 1.0;
        if (w == 0.0) continue;
        total += w * smooth_l1_term(p[i] - target[i]);
        count += w;
    }
    if (count == 0.0) throw ArgumentError("smooth_l1: mask selects no elements");
    const std::size_t ip = pred.id();
    return pred.tape()->record(
        Tensor::scalar(total / count), {ip}, [ip, target, mask, count](Tape& t, std::size_t self) {
            const double g = t.grad(self)[0] / count;
            const Tensor& p = t.value(ip);
            Tensor& gp = t.grad_buffer(ip);
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double w = mask ? (*mask)[i] : 1.0;
                if (w == 0.0) continue;
                const double r = p[i] - target[i];
                gp[i] += g * w * std::clamp(r, -1.0, 1.0);
            }
        });
}

} // namespace lstmcov::ad
