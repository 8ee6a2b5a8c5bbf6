#include "autoloss/losses.hpp"

#include <algorithm>
#include <cmath>

#include "autoloss/error.hpp"

namespace autoloss {

namespace {

struct KindInfo {
    LossKind kind;
    std::string_view name;
    bool classification;
};

constexpr KindInfo kKinds[] = {
    {LossKind::cross_entropy, "ce", true},
    {LossKind::focal, "focal", true},
    {LossKind::categorical_hinge, "hinge", true},
    {LossKind::kl_divergence, "kl", true},
    {LossKind::mse, "mse", false},
    {LossKind::mae, "mae", false},
    {LossKind::huber, "huber", false},
    {LossKind::ce_label_noise, "ce_noisy", true},
    {LossKind::hinge_inverted, "hinge_inverted", true},
    {LossKind::kl_shifted, "kl_shifted", true},
};

double clamp_pred(double p) {
    return std::clamp(p, kPredClamp, 1.0 - kPredClamp);
}

}  // namespace

std::string_view loss_kind_name(LossKind kind) {
    for (const auto& info : kKinds) {
        if (info.kind == kind) return info.name;
    }
    throw ConfigError("loss: unknown kind id");
}

LossKind loss_kind_from_name(std::string_view name) {
    for (const auto& info : kKinds) {
        if (info.name == name) return info.kind;
    }
    throw ConfigError("loss: unknown loss name '" + std::string(name) + "'");
}

bool loss_compatible(LossKind kind, TaskKind task) {
    for (const auto& info : kKinds) {
        if (info.kind == kind) {
            return info.classification ? task != TaskKind::regression
                                       : task == TaskKind::regression;
        }
    }
    return false;
}

void LossCatalog::validate(bool allow_single) const {
    if (kinds.size() < (allow_single ? 1u : 2u)) {
        throw ConfigError("loss catalog: needs at least " +
                          std::string(allow_single ? "1 entry" : "2 entries"));
    }
    for (LossKind k : kinds) {
        if (!loss_compatible(k, task.kind)) {
            throw ConfigError("loss catalog: '" + std::string(loss_kind_name(k)) +
                              "' is incompatible with task " + task_to_string(task));
        }
    }
}

LossCatalog LossCatalog::from_names(std::span<const std::string> names, const TaskSpec& task,
                                    const LossHyper& hyper) {
    LossCatalog catalog;
    catalog.task = task;
    catalog.hyper = hyper;
    for (const auto& n : names) {
        catalog.kinds.push_back(loss_kind_from_name(n));
    }
    return catalog;
}

namespace {

// Per-example classification losses over an explicit class-probability view.
// Binary predictions (pred_dim 1) are handled through the implied
// distribution [1-yhat, yhat]; gradients are folded back onto the scalar.
struct ClassProbs {
    const double* row;      // multiclass row, or nullptr for binary
    double p1;              // binary positive-class probability
    std::size_t k;

    double prob(std::size_t c) const {
        if (row) return row[c];
        return c == 1 ? p1 : 1.0 - p1;
    }
};

struct ExampleGrad {
    double* row = nullptr;  // multiclass gradient row
    double* scalar = nullptr;

    void add(std::size_t c, double g) {
        if (row) {
            row[c] += g;
        } else if (scalar) {
            // dq1/dyhat = 1, dq0/dyhat = -1
            *scalar += (c == 1 ? g : -g);
        }
    }
};

void eval_log_loss(LossKind kind, const ClassProbs& q, std::size_t target,
                   const LossHyper& hyper, double& value, ExampleGrad grad) {
    const double qt = clamp_pred(q.prob(target));
    switch (kind) {
        case LossKind::cross_entropy:
        case LossKind::kl_divergence: {
            // For one-hot targets KL(y||yhat) has zero label entropy and
            // coincides with cross-entropy.
            value = -std::log(qt);
            grad.add(target, -1.0 / qt);
            break;
        }
        case LossKind::kl_shifted: {
            value = -std::log(qt) + hyper.kl_shift;
            grad.add(target, -1.0 / qt);
            break;
        }
        case LossKind::focal: {
            const double g = hyper.focal_gamma;
            const double one_m = 1.0 - qt;
            const double pow_g = std::pow(one_m, g);
            value = -pow_g * std::log(qt);
            double d = -pow_g / qt;
            if (g != 0.0) {
                d += g * std::pow(one_m, g - 1.0) * std::log(qt);
            }
            grad.add(target, d);
            break;
        }
        case LossKind::ce_label_noise: {
            // Expected cross-entropy under label flips: with probability
            // `rate` the target is replaced by a uniform non-target class.
            const double rate = hyper.label_noise_rate;
            double v = -(1.0 - rate) * std::log(qt);
            grad.add(target, -(1.0 - rate) / qt);
            const double w = rate / static_cast<double>(q.k - 1);
            for (std::size_t c = 0; c < q.k; ++c) {
                if (c == target) continue;
                const double qc = clamp_pred(q.prob(c));
                v += -w * std::log(qc);
                grad.add(c, -w / qc);
            }
            value = v;
            break;
        }
        default:
            throw ConfigError("loss: internal dispatch error");
    }
}

void eval_hinge(LossKind kind, const ClassProbs& q, std::size_t target, double& value,
                ExampleGrad grad) {
    // Best competing class.
    std::size_t best = target == 0 ? 1 : 0;
    double best_p = q.prob(best);
    for (std::size_t c = 0; c < q.k; ++c) {
        if (c == target) continue;
        if (q.prob(c) > best_p) {
            best_p = q.prob(c);
            best = c;
        }
    }
    const double qt = q.prob(target);
    if (kind == LossKind::categorical_hinge) {
        const double margin = 1.0 + best_p - qt;
        if (margin > 0.0) {
            value = margin;
            grad.add(best, 1.0);
            grad.add(target, -1.0);
        } else {
            value = 0.0;
        }
    } else {  // hinge_inverted
        const double margin = 1.0 + qt - best_p;
        if (margin > 0.0) {
            value = margin;
            grad.add(target, 1.0);
            grad.add(best, -1.0);
        } else {
            value = 0.0;
        }
    }
}

void eval_regression(LossKind kind, double label, double pred, const LossHyper& hyper,
                     double& value, double* grad) {
    const double e = pred - label;
    double g = 0.0;
    switch (kind) {
        case LossKind::mse:
            value = e * e;
            g = 2.0 * e;
            break;
        case LossKind::mae:
            value = std::abs(e);
            g = e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0);
            break;
        case LossKind::huber: {
            const double d = hyper.huber_delta;
            if (std::abs(e) <= d) {
                value = 0.5 * e * e;
                g = e;
            } else {
                value = d * (std::abs(e) - 0.5 * d);
                g = e > 0.0 ? d : -d;
            }
            break;
        }
        default:
            throw ConfigError("loss: internal dispatch error");
    }
    if (grad) *grad += g;
}

}  // namespace

void loss_eval(LossKind kind, std::span<const double> labels, const Tensor& yhat,
               const TaskSpec& task, const LossHyper& hyper, std::span<double> values,
               Tensor* grads) {
    if (!loss_compatible(kind, task.kind)) {
        throw ConfigError("loss: '" + std::string(loss_kind_name(kind)) +
                          "' is incompatible with task " + task_to_string(task));
    }
    const std::size_t batch = yhat.rows();
    const std::size_t pred_dim = yhat.cols();
    if (pred_dim != task.pred_dim()) {
        throw DimError("loss: prediction " + yhat.shape_str() + " does not match task " +
                       task_to_string(task));
    }
    if (labels.size() != batch || values.size() != batch) {
        throw DimError("loss: batch size mismatch between labels, values and predictions");
    }
    if (grads) {
        if (grads->rows() != batch || grads->cols() != pred_dim) {
            throw DimError("loss: gradient tensor " + grads->shape_str() + " must be " +
                           Tensor({batch, pred_dim}).shape_str());
        }
        grads->zero();
    }

    if (task.kind == TaskKind::regression) {
        for (std::size_t b = 0; b < batch; ++b) {
            eval_regression(kind, labels[b], yhat[b], hyper, values[b],
                            grads ? &grads->at(b, 0) : nullptr);
        }
        return;
    }

    const bool binary = task.kind == TaskKind::binary;
    const std::size_t k = binary ? 2 : task.num_classes;
    for (std::size_t b = 0; b < batch; ++b) {
        const auto target = static_cast<std::size_t>(labels[b]);
        if (target >= k) {
            throw DataError("loss: label " + std::to_string(labels[b]) +
                            " out of range for " + std::to_string(k) + " classes");
        }
        ClassProbs q{binary ? nullptr : yhat.data() + b * pred_dim, binary ? yhat[b] : 0.0, k};
        ExampleGrad grad;
        if (grads) {
            if (binary) {
                grad.scalar = &grads->at(b, 0);
            } else {
                grad.row = grads->data() + b * pred_dim;
            }
        }
        switch (kind) {
            case LossKind::categorical_hinge:
            case LossKind::hinge_inverted:
                eval_hinge(kind, q, target, values[b], grad);
                break;
            default:
                eval_log_loss(kind, q, target, hyper, values[b], grad);
                break;
        }
    }
}

CandidateLossMatrix candidate_matrix(std::span<const double> labels, const Tensor& yhat,
                                     const LossCatalog& catalog) {
    catalog.validate(/*allow_single=*/true);
    const std::size_t batch = yhat.rows();
    const std::size_t pred_dim = yhat.cols();
    const std::size_t n = catalog.size();

    CandidateLossMatrix out;
    out.losses = Tensor({batch, n});
    out.grads = Tensor({batch, n, pred_dim});

    std::vector<double> values(batch);
    Tensor col_grads({batch, pred_dim});
    for (std::size_t j = 0; j < n; ++j) {
        loss_eval(catalog.kinds[j], labels, yhat, catalog.task, catalog.hyper, values,
                  &col_grads);
        for (std::size_t b = 0; b < batch; ++b) {
            out.losses.at(b, j) = values[b];
            for (std::size_t d = 0; d < pred_dim; ++d) {
                out.grads[(b * n + j) * pred_dim + d] = col_grads.at(b, d);
            }
        }
    }
    if (!out.losses.all_finite()) {
        throw NumericError("candidate matrix: non-finite loss value");
    }
    return out;
}

double weighted_loss(const Tensor& selection_probs, const Tensor& losses) {
    check_same_shape(selection_probs, losses, "weighted_loss");
    const std::size_t batch = losses.rows();
    const std::size_t n = losses.cols();
    double total = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < n; ++i) {
            total += selection_probs.at(b, i) * losses.at(b, i);
        }
    }
    return total / static_cast<double>(batch);
}

Tensor weighted_loss_grad_probs(const Tensor& losses) {
    Tensor g = losses;
    g.scale(1.0 / static_cast<double>(losses.rows()));
    return g;
}

Tensor weighted_loss_grad_pred(const Tensor& selection_probs,
                               const CandidateLossMatrix& matrix, std::size_t pred_dim) {
    check_same_shape(selection_probs, matrix.losses, "weighted_loss_grad_pred");
    const std::size_t batch = matrix.losses.rows();
    const std::size_t n = matrix.losses.cols();
    Tensor out({batch, pred_dim});
    const double inv_b = 1.0 / static_cast<double>(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < n; ++i) {
            const double w = selection_probs.at(b, i) * inv_b;
            const double* g = matrix.grads.data() + (b * n + i) * pred_dim;
            for (std::size_t d = 0; d < pred_dim; ++d) {
                out.at(b, d) += w * g[d];
            }
        }
    }
    return out;
}

}  // namespace autoloss
