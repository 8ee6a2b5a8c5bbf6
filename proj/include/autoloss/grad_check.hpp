#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "autoloss/tensor.hpp"

namespace autoloss {

struct GradCheckOptions {
    double step = 1e-5;                      // central-difference step h
    std::size_t max_coords_per_tensor = 24;  // sampled without replacement
    std::uint64_t seed = 17;
    // A coordinate is skipped as kink-adjacent when the one-sided difference
    // quotients disagree by more than this, relative to their magnitude.
    double kink_tol = 1e-3;
    // Coordinates where both the analytic and numeric gradients fall below
    // this are under the finite-difference noise floor and carry no signal;
    // 0 disables the skip.
    double abs_floor = 0.0;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;  // kink-adjacent coordinates excluded
};

// Compares analytic gradients against central finite differences.
//
// `loss(true)` must run forward and backward, accumulating gradients into the
// given parameters (the checker zeroes them first); `loss(false)` must run
// forward only. The closure has to be deterministic: run models in eval mode
// or with fixed rng state.
//
// Relative error per coordinate: |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
GradCheckReport gradient_check(const std::function<double(bool)>& loss,
                               std::span<Parameter* const> params,
                               const GradCheckOptions& opts = {});

}  // namespace autoloss
