#include "lstmcov/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "lstmcov/errors.hpp"

namespace lstmcov {

std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != shape_size(shape_))
        throw DimensionError("tensor shape " + shape_string(shape_) + " needs " + std::to_string(shape_size(shape_)) +
                             " values, got " + std::to_string(data_.size()));
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size())
        throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_string(shape_));
    return shape_[axis];
}

double Tensor::item() const {
    if (data_.size() != 1) throw DimensionError("item() on tensor of shape " + shape_string(shape_));
    return data_[0];
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size())
        throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                             shape_string(b.shape()));
}

namespace {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;
} // namespace

void gemm(const Tensor& a, bool transpose_a, const Tensor& b, bool transpose_b, Tensor& out, bool accumulate) {
    if (a.rank() != 2 || b.rank() != 2)
        throw DimensionError("matmul needs 2-D operands, got " + shape_string(a.shape()) + " and " +
                             shape_string(b.shape()));
    const auto m = transpose_a ? a.dim(1) : a.dim(0);
    const auto k = transpose_a ? a.dim(0) : a.dim(1);
    const auto kb = transpose_b ? b.dim(1) : b.dim(0);
    const auto n = transpose_b ? b.dim(0) : b.dim(1);
    if (k != kb)
        throw DimensionError("matmul: inner dimensions differ for " + shape_string(a.shape()) +
                             (transpose_a ? "^T" : "") + " and " + shape_string(b.shape()) + (transpose_b ? "^T" : ""));
    if (!accumulate || out.shape() != Shape{m, n}) {
        if (accumulate && !out.empty()) throw DimensionError("matmul: accumulator shape " + shape_string(out.shape()));
        out = Tensor({m, n});
    }
    ConstMap A(a.data(), static_cast<Eigen::Index>(a.dim(0)), static_cast<Eigen::Index>(a.dim(1)));
    ConstMap B(b.data(), static_cast<Eigen::Index>(b.dim(0)), static_cast<Eigen::Index>(b.dim(1)));
    Map C(out.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    if (!transpose_a && !transpose_b) C.noalias() += A * B;
    else if (!transpose_a && transpose_b) C.noalias() += A * B.transpose();
    else if (transpose_a && !transpose_b) C.noalias() += A.transpose() * B;
    else C.noalias() += A.transpose() * B.transpose();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    Tensor out;
    gemm(a, false, b, false, out, false);
    return out;
}

} // namespace lstmcov
