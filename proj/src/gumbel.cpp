#include "autoloss/gumbel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "autoloss/error.hpp"

namespace autoloss {

namespace {

// Guards log() against controller outputs that underflowed to zero.
constexpr double kAlphaFloor = 1e-300;

}  // namespace

Tensor sample_gumbel(std::size_t rows, std::size_t cols, RngStream& stream) {
    Tensor g({rows, cols});
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = -std::log(-std::log(stream.uniform01_open()));
    }
    return g;
}

Tensor gumbel_softmax(const Tensor& alpha, const Tensor& noise, double tau,
                      GumbelSoftmaxCache* cache) {
    if (tau <= 0.0) {
        throw ConfigError("gumbel_softmax: temperature must be positive, got " +
                          std::to_string(tau));
    }
    check_same_shape(alpha, noise, "gumbel_softmax");
    const std::size_t rows = alpha.rows();
    const std::size_t n = alpha.cols();

    Tensor clamped = alpha;
    for (std::size_t i = 0; i < clamped.size(); ++i) {
        clamped[i] = std::max(clamped[i], kAlphaFloor);
    }

    Tensor probs({rows, n});
    std::vector<double> logits(n);
    for (std::size_t r = 0; r < rows; ++r) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            logits[i] = (std::log(clamped.at(r, i)) + noise.at(r, i)) / tau;
            mx = std::max(mx, logits[i]);
        }
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            probs.at(r, i) = std::exp(logits[i] - mx);
            sum += probs.at(r, i);
        }
        for (std::size_t i = 0; i < n; ++i) {
            probs.at(r, i) /= sum;
        }
    }

    if (cache) {
        cache->probs = probs;
        cache->alpha = std::move(clamped);
        cache->tau = tau;
    }
    return probs;
}

Tensor gumbel_softmax_backward(const Tensor& dprobs, const GumbelSoftmaxCache& cache) {
    check_same_shape(dprobs, cache.probs, "gumbel_softmax backward");
    const std::size_t rows = dprobs.rows();
    const std::size_t n = dprobs.cols();
    Tensor dalpha({rows, n});
    for (std::size_t r = 0; r < rows; ++r) {
        // Softmax backward onto the logits, then d(logit)/d(alpha) = 1/(tau*alpha).
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            dot += dprobs.at(r, i) * cache.probs.at(r, i);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double dlogit = cache.probs.at(r, i) * (dprobs.at(r, i) - dot);
            dalpha.at(r, i) = dlogit / (cache.tau * cache.alpha.at(r, i));
        }
    }
    return dalpha;
}

std::vector<std::size_t> hard_select(const Tensor& alpha, const Tensor& noise) {
    check_same_shape(alpha, noise, "hard_select");
    const std::size_t rows = alpha.rows();
    const std::size_t n = alpha.cols();
    std::vector<std::size_t> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t best = 0;
        double best_v = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            const double v = std::log(std::max(alpha.at(r, i), kAlphaFloor)) + noise.at(r, i);
            if (v > best_v) {  // strict: ties keep the lowest index
                best_v = v;
                best = i;
            }
        }
        out[r] = best;
    }
    return out;
}

double temperature(std::uint64_t step) {
    return std::max(kTemperatureFloor, 1.0 - kTemperatureSlope * static_cast<double>(step));
}

}  // namespace autoloss
