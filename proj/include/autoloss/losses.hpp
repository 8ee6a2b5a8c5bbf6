#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "autoloss/schema.hpp"
#include "autoloss/tensor.hpp"

namespace autoloss {

// Candidate loss functions. The first block is the regular catalog; the
// diagnostic block holds deliberately corrupted variants used to verify that
// the selection mechanism routes probability mass toward sound candidates.
enum class LossKind {
    // classification
    cross_entropy,
    focal,
    categorical_hinge,
    kl_divergence,
    // regression
    mse,
    mae,
    huber,
    // diagnostic (classification)
    ce_label_noise,   // expected CE under heavy label-flip noise
    hinge_inverted,   // margin pushed away from the target class
    kl_shifted,       // KL plus a constant offset (same gradients, worse value)
};

struct LossHyper {
    double focal_gamma = 2.0;
    double huber_delta = 1.0;
    double label_noise_rate = 0.9;  // ce_label_noise flip probability
    double kl_shift = 1.0;          // kl_shifted constant offset
};

std::string_view loss_kind_name(LossKind kind);
LossKind loss_kind_from_name(std::string_view name);
bool loss_compatible(LossKind kind, TaskKind task);

// Ordered list of candidate losses; order is significant (the controller's
// output dimension matches it).
struct LossCatalog {
    std::vector<LossKind> kinds;
    LossHyper hyper;
    TaskSpec task;

    std::size_t size() const { return kinds.size(); }
    void validate(bool allow_single = false) const;

    static LossCatalog from_names(std::span<const std::string> names, const TaskSpec& task,
                                  const LossHyper& hyper = {});
};

// Per-example loss of one candidate.
//   values: B
//   grads (optional): B x pred_dim, d(value_b)/d(yhat_b); log-based losses
//   clamp predictions to [1e-7, 1-1e-7] and differentiate at the clamped point.
void loss_eval(LossKind kind, std::span<const double> labels, const Tensor& yhat,
               const TaskSpec& task, const LossHyper& hyper, std::span<double> values,
               Tensor* grads);

// B x n candidate losses with gradients w.r.t. predictions; column j comes
// from catalog entry j alone.
struct CandidateLossMatrix {
    Tensor losses;  // B x n
    Tensor grads;   // B x n x pred_dim
};

CandidateLossMatrix candidate_matrix(std::span<const double> labels, const Tensor& yhat,
                                     const LossCatalog& catalog);

// mean over the batch of sum_i p_bi * loss_bi.
double weighted_loss(const Tensor& selection_probs, const Tensor& losses);

// dL/dp for the weighted loss above (losses / B).
Tensor weighted_loss_grad_probs(const Tensor& losses);

// Folds selection probabilities into prediction gradients:
//   dL/dyhat_b = sum_i p_bi * grads_bi / B.
Tensor weighted_loss_grad_pred(const Tensor& selection_probs,
                               const CandidateLossMatrix& matrix, std::size_t pred_dim);

constexpr double kPredClamp = 1e-7;

}  // namespace autoloss
