#include "autoloss/ops.hpp"

#include <Eigen/Core>

#include <cmath>
#include <string>

#include "autoloss/error.hpp"

namespace autoloss {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

ConstMatMap map2d(const Tensor& t) {
    return ConstMatMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                       static_cast<Eigen::Index>(t.cols()));
}

MatMap map2d(Tensor& t) {
    return MatMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

}  // namespace

Tensor affine_forward(const Tensor& x, const Parameter& w, const Parameter& b,
                      AffineCache& cache) {
    const std::size_t in_dim = w.value.dim(0);
    const std::size_t out_dim = w.value.dim(1);
    if (x.cols() != in_dim) {
        throw DimError("affine: input " + x.shape_str() + " incompatible with weight " +
                       w.value.shape_str());
    }
    if (b.value.size() != out_dim) {
        throw DimError("affine: bias " + b.value.shape_str() + " incompatible with weight " +
                       w.value.shape_str());
    }
    Tensor y({x.rows(), out_dim});
    map2d(y).noalias() = map2d(x) * map2d(w.value);
    map2d(y).rowwise() += ConstVecMap(b.value.data(), static_cast<Eigen::Index>(out_dim)).transpose();
    cache.input = x;
    return y;
}

Tensor affine_backward(const Tensor& dy, const AffineCache& cache, Parameter& w, Parameter& b) {
    const Tensor& x = cache.input;
    const std::size_t out_dim = w.value.dim(1);
    if (dy.rows() != x.rows() || dy.cols() != out_dim) {
        throw DimError("affine backward: upstream " + dy.shape_str() + " incompatible with weight " +
                       w.value.shape_str());
    }
    Tensor dx(x.shape());
    map2d(dx).noalias() = map2d(dy) * map2d(w.value).transpose();
    map2d(w.grad).noalias() += map2d(x).transpose() * map2d(dy);
    Eigen::Map<Eigen::VectorXd>(b.grad.data(), static_cast<Eigen::Index>(out_dim)) +=
        map2d(dy).colwise().sum().transpose();
    return dx;
}

Tensor relu_forward(const Tensor& x, ReluCache& cache) {
    Tensor y(x.shape());
    cache.mask.assign(x.size(), 0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0) {
            y[i] = x[i];
            cache.mask[i] = 1;
        }
    }
    return y;
}

Tensor relu_backward(const Tensor& dy, const ReluCache& cache) {
    if (dy.size() != cache.mask.size()) {
        throw DimError("relu backward: upstream " + dy.shape_str() + " does not match cache");
    }
    Tensor dx(dy.shape());
    for (std::size_t i = 0; i < dy.size(); ++i) {
        dx[i] = cache.mask[i] ? dy[i] : 0.0;
    }
    return dx;
}

Tensor sigmoid_forward(const Tensor& x, SigmoidCache& cache) {
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double v = x[i];
        if (v >= 0.0) {
            y[i] = 1.0 / (1.0 + std::exp(-v));
        } else {
            double e = std::exp(v);
            y[i] = e / (1.0 + e);
        }
    }
    cache.output = y;
    return y;
}

Tensor sigmoid_backward(const Tensor& dy, const SigmoidCache& cache) {
    check_same_shape(dy, cache.output, "sigmoid backward");
    Tensor dx(dy.shape());
    for (std::size_t i = 0; i < dy.size(); ++i) {
        double s = cache.output[i];
        dx[i] = dy[i] * s * (1.0 - s);
    }
    return dx;
}

Tensor softmax_forward(const Tensor& x, SoftmaxCache& cache) {
    const std::size_t rows = x.rows();
    const std::size_t cols = x.cols();
    Tensor y(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xi = x.data() + r * cols;
        double* yi = y.data() + r * cols;
        double mx = xi[0];
        for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, xi[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            yi[c] = std::exp(xi[c] - mx);
            sum += yi[c];
        }
        for (std::size_t c = 0; c < cols; ++c) yi[c] /= sum;
    }
    cache.output = y;
    return y;
}

Tensor softmax_backward(const Tensor& dy, const SoftmaxCache& cache) {
    check_same_shape(dy, cache.output, "softmax backward");
    const Tensor& y = cache.output;
    const std::size_t rows = dy.rows();
    const std::size_t cols = dy.cols();
    Tensor dx(dy.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* g = dy.data() + r * cols;
        const double* p = y.data() + r * cols;
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += g[c] * p[c];
        double* out = dx.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) out[c] = p[c] * (g[c] - dot);
    }
    return dx;
}

Tensor dropout_forward(const Tensor& x, double rate, bool train, RngStream* rng,
                       DropoutCache& cache) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ConfigError("dropout: rate must be in [0,1), got " + std::to_string(rate));
    }
    if (!train || rate == 0.0) {
        cache.identity = true;
        cache.mask.clear();
        return x;
    }
    if (rng == nullptr) {
        throw ConfigError("dropout: train mode requires an rng stream");
    }
    cache.identity = false;
    cache.mask.assign(x.size(), 0.0);
    const double keep_scale = 1.0 / (1.0 - rate);
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (rng->uniform01() >= rate) {
            cache.mask[i] = keep_scale;
            y[i] = x[i] * keep_scale;
        }
    }
    return y;
}

Tensor dropout_backward(const Tensor& dy, const DropoutCache& cache) {
    if (cache.identity) {
        return dy;
    }
    if (dy.size() != cache.mask.size()) {
        throw DimError("dropout backward: upstream " + dy.shape_str() + " does not match cache");
    }
    Tensor dx(dy.shape());
    for (std::size_t i = 0; i < dy.size(); ++i) {
        dx[i] = dy[i] * cache.mask[i];
    }
    return dx;
}

BatchNorm::BatchNorm(std::size_t features)
    : features_(features),
      gamma_(Tensor::full({features}, 1.0)),
      beta_(Tensor::zeros({features})),
      running_mean_(Tensor::zeros({features})),
      running_var_(Tensor::full({features}, 1.0)) {}

Tensor BatchNorm::forward(const Tensor& x, bool train, BatchNormCache& cache) {
    const std::size_t batch = x.rows();
    const std::size_t f = x.cols();
    if (f != features_) {
        throw DimError("batchnorm: input " + x.shape_str() + " expected feature dim " +
                       std::to_string(features_));
    }
    cache.train = train;
    cache.xhat = Tensor({batch, f});
    cache.inv_std = Tensor({f});
    Tensor y({batch, f});

    if (train) {
        if (batch < 2) {
            throw DataError("batchnorm: degenerate batch of size " + std::to_string(batch) +
                            " in train mode");
        }
        for (std::size_t c = 0; c < f; ++c) {
            double mean = 0.0;
            for (std::size_t r = 0; r < batch; ++r) mean += x.at(r, c);
            mean /= static_cast<double>(batch);
            double var = 0.0;
            for (std::size_t r = 0; r < batch; ++r) {
                double d = x.at(r, c) - mean;
                var += d * d;
            }
            var /= static_cast<double>(batch);
            double inv = 1.0 / std::sqrt(var + kEps);
            cache.inv_std[c] = inv;
            for (std::size_t r = 0; r < batch; ++r) {
                double xh = (x.at(r, c) - mean) * inv;
                cache.xhat.at(r, c) = xh;
                y.at(r, c) = gamma_.value[c] * xh + beta_.value[c];
            }
            double unbiased = var * static_cast<double>(batch) / static_cast<double>(batch - 1);
            running_mean_[c] = kMomentum * running_mean_[c] + (1.0 - kMomentum) * mean;
            running_var_[c] = kMomentum * running_var_[c] + (1.0 - kMomentum) * unbiased;
        }
    } else {
        for (std::size_t c = 0; c < f; ++c) {
            double inv = 1.0 / std::sqrt(running_var_[c] + kEps);
            cache.inv_std[c] = inv;
            for (std::size_t r = 0; r < batch; ++r) {
                double xh = (x.at(r, c) - running_mean_[c]) * inv;
                cache.xhat.at(r, c) = xh;
                y.at(r, c) = gamma_.value[c] * xh + beta_.value[c];
            }
        }
    }
    return y;
}

Tensor BatchNorm::backward(const Tensor& dy, const BatchNormCache& cache) {
    check_same_shape(dy, cache.xhat, "batchnorm backward");
    const std::size_t batch = dy.rows();
    const std::size_t f = dy.cols();
    Tensor dx({batch, f});

    for (std::size_t c = 0; c < f; ++c) {
        double dgamma = 0.0;
        double dbeta = 0.0;
        for (std::size_t r = 0; r < batch; ++r) {
            dgamma += dy.at(r, c) * cache.xhat.at(r, c);
            dbeta += dy.at(r, c);
        }
        gamma_.grad[c] += dgamma;
        beta_.grad[c] += dbeta;

        double g = gamma_.value[c];
        double inv = cache.inv_std[c];
        if (cache.train) {
            // dxhat = dy * gamma; dx folds in the mean/variance paths.
            double sum_dxhat = dbeta * g;
            double sum_dxhat_xhat = dgamma * g;
            double n = static_cast<double>(batch);
            for (std::size_t r = 0; r < batch; ++r) {
                double dxhat = dy.at(r, c) * g;
                dx.at(r, c) =
                    inv / n * (n * dxhat - sum_dxhat - cache.xhat.at(r, c) * sum_dxhat_xhat);
            }
        } else {
            for (std::size_t r = 0; r < batch; ++r) {
                dx.at(r, c) = dy.at(r, c) * g * inv;
            }
        }
    }
    return dx;
}

void BatchNorm::collect_params(const std::string& prefix, std::vector<NamedParam>& out) {
    out.push_back({prefix + ".gamma", &gamma_});
    out.push_back({prefix + ".beta", &beta_});
}

void BatchNorm::collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out) {
    out.push_back({prefix + ".running_mean", &running_mean_});
    out.push_back({prefix + ".running_var", &running_var_});
}

void init_gaussian(Tensor& t, double stddev, RngStream& rng) {
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = stddev * rng.gaussian();
    }
}

void init_glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, RngStream& rng) {
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = rng.uniform(-limit, limit);
    }
}

}  // namespace autoloss
