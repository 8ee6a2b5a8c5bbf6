#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "autoloss/tensor.hpp"

namespace autoloss {

struct AdamConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam over a fixed parameter set. step() consumes the
// accumulated gradients and zeroes them afterward; a non-finite gradient
// aborts before touching any value.
class AdamState {
public:
    AdamState(std::span<const NamedParam> params, const AdamConfig& cfg);

    void step(std::span<const NamedParam> params);

    std::uint64_t step_count() const { return step_count_; }
    const AdamConfig& config() const { return cfg_; }

    // Moment access for checkpointing, in the order of the constructing set.
    std::span<Tensor> first_moments() { return m_; }
    std::span<Tensor> second_moments() { return v_; }
    void set_step_count(std::uint64_t t) { step_count_ = t; }

private:
    AdamConfig cfg_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    std::uint64_t step_count_ = 0;
};

}  // namespace autoloss
