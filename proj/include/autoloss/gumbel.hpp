#pragma once

#include <cstdint>
#include <vector>

#include "autoloss/rng.hpp"
#include "autoloss/tensor.hpp"

namespace autoloss {

// i.i.d. standard Gumbel noise g = -log(-log(u)), u ~ Uniform(0,1), drawn
// from a dedicated stream.
Tensor sample_gumbel(std::size_t rows, std::size_t cols, RngStream& stream);

struct GumbelSoftmaxCache {
    Tensor probs;  // p, B x n
    Tensor alpha;  // clamped controller probabilities used in the forward
    double tau = 1.0;
};

// p_i = softmax_i((log alpha_i + g_i) / tau) per row, with max-subtraction
// stabilization. Rows of alpha must be positive; tau must be positive.
Tensor gumbel_softmax(const Tensor& alpha, const Tensor& noise, double tau,
                      GumbelSoftmaxCache* cache = nullptr);

// dL/dalpha from dL/dp, through the softmax and the 1/(tau*alpha) log path.
Tensor gumbel_softmax_backward(const Tensor& dprobs, const GumbelSoftmaxCache& cache);

// Gumbel-max hard selection: argmax_i(log alpha_i + g_i) per row, ties broken
// toward the lowest index. Reporting/ablation only; not on the gradient path.
std::vector<std::size_t> hard_select(const Tensor& alpha, const Tensor& noise);

// Annealing schedule tau(t) = max(0.01, 1 - 0.00005 * t).
double temperature(std::uint64_t step);

constexpr double kTemperatureFloor = 0.01;
constexpr double kTemperatureSlope = 0.00005;

}  // namespace autoloss
