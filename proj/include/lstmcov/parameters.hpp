#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "lstmcov/tensor.hpp"

namespace lstmcov {

/// Named parameter tensors with matching gradient buffers and a flat scalar
/// index. Flat order is registration order, then row-major within a tensor;
/// it is stable across copies and across save/load.
class ParameterStore {
public:
    std::size_t add(std::string name, Tensor value);

    std::size_t count() const noexcept { return values_.size(); }
    std::size_t scalar_count() const noexcept { return offsets_.empty() ? 0 : offsets_.back(); }
    const std::string& name(std::size_t i) const { return names_.at(i); }
    std::size_t index_of(const std::string& name) const;

    Tensor& value(std::size_t i) { return values_.at(i); }
    const Tensor& value(std::size_t i) const { return values_.at(i); }
    Tensor& grad(std::size_t i) { return grads_.at(i); }
    const Tensor& grad(std::size_t i) const { return grads_.at(i); }

    struct FlatRef {
        std::size_t param;
        std::size_t offset;
    };
    FlatRef locate(std::size_t flat) const;
    double flat_value(std::size_t flat) const;
    void set_flat_value(std::size_t flat, double v);
    double flat_grad(std::size_t flat) const;
    /// e.g. "lstm.0.w_ih[17]"
    std::string flat_name(std::size_t flat) const;

    void zero_grad();
    /// Bitwise equality of names, shapes and values (gradients ignored).
    bool same_values(const ParameterStore& other) const;

    /// Text form: one `param <name> <rank> <dims...>` line followed by the
    /// values as hexadecimal floats, so a reload is bit-exact.
    void write(std::ostream& out) const;
    static ParameterStore read(std::istream& in);

private:
    std::vector<std::string> names_;
    std::vector<Tensor> values_;
    std::vector<Tensor> grads_;
    std::vector<std::size_t> offsets_;  // cumulative scalar counts
};

std::string format_hex(double v);
double parse_hex(const std::string& token);

} // namespace lstmcov
