#include "autoloss/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "autoloss/error.hpp"
#include "autoloss/losses.hpp"

namespace autoloss {

double auc_binary(std::span<const double> labels, std::span<const double> scores) {
    if (labels.size() != scores.size()) {
        throw DimError("auc: labels and scores differ in length");
    }
    const std::size_t n = labels.size();
    std::size_t positives = 0;
    for (double y : labels) {
        if (y != 0.0 && y != 1.0) {
            throw DataError("auc: labels must be 0/1, got " + std::to_string(y));
        }
        positives += y > 0.5;
    }
    const std::size_t negatives = n - positives;
    if (positives == 0 || negatives == 0) {
        throw DataError("auc: undefined, only one class present");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Average ranks over tied scores, then the Mann-Whitney statistic.
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) {
            ++j;
        }
        const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[order[k]] > 0.5) {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    const double np = static_cast<double>(positives);
    const double nn = static_cast<double>(negatives);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

double auc_binary_bruteforce(std::span<const double> labels, std::span<const double> scores) {
    const std::size_t n = labels.size();
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] < 0.5) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (labels[j] > 0.5) continue;
            ++pairs;
            if (scores[i] > scores[j]) {
                wins += 1.0;
            } else if (scores[i] == scores[j]) {
                wins += 0.5;
            }
        }
    }
    if (pairs == 0) {
        throw DataError("auc: undefined, only one class present");
    }
    return wins / static_cast<double>(pairs);
}

double auc_multiclass(std::span<const double> labels, const Tensor& scores) {
    const std::size_t n = labels.size();
    if (scores.rows() != n) {
        throw DimError("auc: labels and score rows differ in length");
    }
    const std::size_t k = scores.cols();
    std::vector<std::size_t> counts(k, 0);
    for (double y : labels) {
        const auto c = static_cast<std::size_t>(y);
        if (y != std::floor(y) || c >= k) {
            throw DataError("auc: class label out of range: " + std::to_string(y));
        }
        ++counts[c];
    }
    std::size_t present = 0;
    for (std::size_t c = 0; c < k; ++c) {
        present += counts[c] > 0;
    }
    if (present < 2) {
        throw DataError("auc: undefined, fewer than 2 classes present");
    }

    double sum = 0.0;
    std::size_t used = 0;
    std::vector<double> bin_labels(n);
    std::vector<double> bin_scores(n);
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0 || counts[c] == n) {
            continue;  // one-vs-rest undefined for this class
        }
        for (std::size_t i = 0; i < n; ++i) {
            bin_labels[i] = labels[i] == static_cast<double>(c) ? 1.0 : 0.0;
            bin_scores[i] = scores.at(i, c);
        }
        sum += auc_binary(bin_labels, bin_scores);
        ++used;
    }
    if (used == 0) {
        throw DataError("auc: undefined, no class admits a one-vs-rest split");
    }
    return sum / static_cast<double>(used);
}

double logloss(std::span<const double> labels, const Tensor& predictions,
               const TaskSpec& task) {
    const std::size_t n = labels.size();
    if (predictions.rows() != n) {
        throw DimError("logloss: labels and prediction rows differ in length");
    }
    if (task.kind == TaskKind::regression) {
        throw ConfigError("logloss: undefined for regression tasks");
    }
    double total = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
        double p;
        if (task.kind == TaskKind::binary) {
            p = labels[b] > 0.5 ? predictions[b] : 1.0 - predictions[b];
        } else {
            p = predictions.at(b, static_cast<std::size_t>(labels[b]));
        }
        p = std::clamp(p, kPredClamp, 1.0 - kPredClamp);
        total += -std::log(p);
    }
    return total / static_cast<double>(n);
}

nlohmann::json MetricReport::to_json() const {
    return nlohmann::json{{"auc", auc}, {"logloss", logloss}, {"n_examples", n_examples}};
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
    MetricReport r;
    r.auc = j.at("auc").get<double>();
    r.logloss = j.at("logloss").get<double>();
    r.n_examples = j.at("n_examples").get<std::size_t>();
    return r;
}

MetricReport compute_metrics(std::span<const double> labels, const Tensor& predictions,
                             const TaskSpec& task) {
    MetricReport report;
    report.n_examples = labels.size();
    if (task.kind == TaskKind::binary) {
        report.auc = auc_binary(labels, predictions.values());
        report.logloss = logloss(labels, predictions, task);
    } else if (task.kind == TaskKind::multiclass) {
        report.auc = auc_multiclass(labels, predictions);
        report.logloss = logloss(labels, predictions, task);
    } else {
        // Regression runs report mean squared error in the logloss slot and
        // leave AUC at zero.
        double mse = 0.0;
        for (std::size_t b = 0; b < labels.size(); ++b) {
            const double e = predictions[b] - labels[b];
            mse += e * e;
        }
        report.logloss = mse / static_cast<double>(labels.size());
    }
    return report;
}

}  // namespace autoloss
