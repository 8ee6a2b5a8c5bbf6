#include "autoloss/adam.hpp"

#include <cmath>

#include "autoloss/error.hpp"

namespace autoloss {

AdamState::AdamState(std::span<const NamedParam> params, const AdamConfig& cfg) : cfg_(cfg) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const NamedParam& p : params) {
        m_.push_back(Tensor::zeros(p.param->value.shape()));
        v_.push_back(Tensor::zeros(p.param->value.shape()));
    }
}

void AdamState::step(std::span<const NamedParam> params) {
    if (params.size() != m_.size()) {
        throw ConfigError("adam: parameter set size changed since construction");
    }
    for (const NamedParam& p : params) {
        if (!p.param->grad.all_finite()) {
            throw NumericError("adam: non-finite gradient in parameter '" + p.name + "'");
        }
    }

    ++step_count_;
    const double t = static_cast<double>(step_count_);
    const double bias1 = 1.0 - std::pow(cfg_.beta1, t);
    const double bias2 = 1.0 - std::pow(cfg_.beta2, t);

    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& value = params[i].param->value;
        Tensor& grad = params[i].param->grad;
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (std::size_t c = 0; c < value.size(); ++c) {
            const double g = grad[c];
            m[c] = cfg_.beta1 * m[c] + (1.0 - cfg_.beta1) * g;
            v[c] = cfg_.beta2 * v[c] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m[c] / bias1;
            const double vhat = v[c] / bias2;
            value[c] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        grad.zero();
    }
}

}  // namespace autoloss
