#include "autoloss/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "autoloss/error.hpp"

namespace autoloss {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), values_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    if (shape_product(shape_) != values_.size()) {
        throw DimError("Tensor: shape " + shape_str() + " does not match value count " +
                       std::to_string(values_.size()));
    }
}

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
}

std::size_t Tensor::rows() const {
    if (shape_.empty()) {
        throw DimError("Tensor: rows() on a rank-0 tensor");
    }
    return shape_[0];
}

std::size_t Tensor::cols() const {
    std::size_t r = rows();
    return r == 0 ? 0 : values_.size() / r;
}

void Tensor::fill(double v) {
    std::fill(values_.begin(), values_.end(), v);
}

bool Tensor::all_finite() const {
    return std::all_of(values_.begin(), values_.end(),
                       [](double x) { return std::isfinite(x); });
}

void Tensor::add(const Tensor& o) {
    check_same_shape(*this, o, "Tensor::add");
    for (std::size_t i = 0; i < values_.size(); ++i) {
        values_[i] += o.values_[i];
    }
}

void Tensor::scale(double s) {
    for (double& v : values_) {
        v *= s;
    }
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << 'x';
        os << shape_[i];
    }
    os << ']';
    return os.str();
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) {
        throw DimError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " +
                       b.shape_str());
    }
}

}  // namespace autoloss
