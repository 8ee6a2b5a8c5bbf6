#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace autoloss {

// Dense row-major float64 tensor. The only tensor type in the engine; models
// are small enough that double precision everywhere is the right trade
// (gradient checks demand it).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> values);

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, double v);
    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    // 2-D views: rows = first dim, cols = product of the rest.
    std::size_t rows() const;
    std::size_t cols() const;

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

    void fill(double v);
    void zero() { fill(0.0); }
    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;

    // In-place elementwise accumulate; shapes must match.
    void add(const Tensor& o);
    void scale(double s);

    std::string shape_str() const;  // e.g. "[4x3x2]"

private:
    std::vector<std::size_t> shape_;
    std::vector<double> values_;
};

// Throws DimError naming `what` when the two shapes differ.
void check_same_shape(const Tensor& a, const Tensor& b, const char* what);

// A trainable tensor with its gradient accumulator. Backward passes add (+=)
// into grad; the optimizer owns zeroing.
struct Parameter {
    Tensor value;
    Tensor grad;

    Parameter() = default;
    explicit Parameter(Tensor v) : value(std::move(v)), grad(Tensor::zeros(value.shape())) {}

    void zero_grad() { grad.zero(); }
};

struct NamedParam {
    std::string name;
    Parameter* param;
};

// Non-trainable model state (batchnorm running statistics).
struct NamedBuffer {
    std::string name;
    Tensor* tensor;
};

}  // namespace autoloss
