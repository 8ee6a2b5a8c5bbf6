#pragma once

#include <span>
#include <string>

#include <json.hpp>

#include "autoloss/schema.hpp"
#include "autoloss/tensor.hpp"

namespace autoloss {

// Probability that a random positive outranks a random negative, ties
// counted half; rank statistic, O(B log B). Both classes must be present.
double auc_binary(std::span<const double> labels, std::span<const double> scores);

// Unweighted one-vs-rest mean of per-class binary AUCs; classes absent from
// the labels are skipped. At least two classes must be present.
double auc_multiclass(std::span<const double> labels, const Tensor& scores);

// Mean negative log-likelihood of the true label; predictions clamped to
// [1e-7, 1-1e-7]. Binary takes B x 1 scores, multiclass B x k rows.
double logloss(std::span<const double> labels, const Tensor& predictions,
               const TaskSpec& task);

// O(B^2) pair-counting AUC, the oracle for the rank-statistic version.
double auc_binary_bruteforce(std::span<const double> labels, std::span<const double> scores);

struct MetricReport {
    double auc = 0.0;
    double logloss = 0.0;
    std::size_t n_examples = 0;

    nlohmann::json to_json() const;
    static MetricReport from_json(const nlohmann::json& j);
};

// AUC (binary or one-vs-rest by task) + logloss on one split.
MetricReport compute_metrics(std::span<const double> labels, const Tensor& predictions,
                             const TaskSpec& task);

}  // namespace autoloss
