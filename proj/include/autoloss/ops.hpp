#pragma once

#include <cstdint>
#include <vector>

#include "autoloss/rng.hpp"
#include "autoloss/tensor.hpp"

namespace autoloss {

// Explicit forward/backward layer kernels. Each forward fills a cache; the
// matching backward consumes it and accumulates parameter gradients (+=).
// Input gradients are returned fresh.

struct AffineCache {
    Tensor input;  // B x in
};

// y = x W + b.  x: B x in, W: in x out, b: out.
Tensor affine_forward(const Tensor& x, const Parameter& w, const Parameter& b,
                      AffineCache& cache);
// Returns dL/dx; accumulates dL/dW, dL/db into the parameter grads.
Tensor affine_backward(const Tensor& dy, const AffineCache& cache, Parameter& w,
                       Parameter& b);

struct ReluCache {
    std::vector<std::uint8_t> mask;
};

Tensor relu_forward(const Tensor& x, ReluCache& cache);
Tensor relu_backward(const Tensor& dy, const ReluCache& cache);

struct SigmoidCache {
    Tensor output;
};

Tensor sigmoid_forward(const Tensor& x, SigmoidCache& cache);
Tensor sigmoid_backward(const Tensor& dy, const SigmoidCache& cache);

struct SoftmaxCache {
    Tensor output;
};

// Row-wise softmax along the last axis (input treated as rows x cols).
Tensor softmax_forward(const Tensor& x, SoftmaxCache& cache);
Tensor softmax_backward(const Tensor& dy, const SoftmaxCache& cache);

struct DropoutCache {
    bool identity = true;
    std::vector<double> mask;  // 0 or 1/(1-rate)
};

// Inverted dropout: train mode zeroes units with probability `rate` and
// scales survivors by 1/(1-rate); eval mode (or rate 0) is a strict identity
// and consumes no randomness.
Tensor dropout_forward(const Tensor& x, double rate, bool train, RngStream* rng,
                       DropoutCache& cache);
Tensor dropout_backward(const Tensor& dy, const DropoutCache& cache);

struct BatchNormCache {
    bool train = false;
    Tensor xhat;     // B x F normalized input
    Tensor inv_std;  // F
};

// Per-feature batch normalization with learned scale/shift and running
// statistics for eval. Normalization uses the biased batch variance; the
// running variance tracks the unbiased one.
class BatchNorm {
public:
    explicit BatchNorm(std::size_t features);

    Tensor forward(const Tensor& x, bool train, BatchNormCache& cache);
    Tensor backward(const Tensor& dy, const BatchNormCache& cache);

    void collect_params(const std::string& prefix, std::vector<NamedParam>& out);
    void collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out);

    Parameter& gamma() { return gamma_; }
    Parameter& beta() { return beta_; }
    const Tensor& running_mean() const { return running_mean_; }
    const Tensor& running_var() const { return running_var_; }

    static constexpr double kMomentum = 0.9;
    static constexpr double kEps = 1e-5;

private:
    std::size_t features_;
    Parameter gamma_;
    Parameter beta_;
    Tensor running_mean_;
    Tensor running_var_;
};

// Parameter initializers.
void init_gaussian(Tensor& t, double stddev, RngStream& rng);
void init_glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, RngStream& rng);

}  // namespace autoloss
