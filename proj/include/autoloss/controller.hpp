#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "autoloss/mlp.hpp"
#include "autoloss/ops.hpp"
#include "autoloss/rng.hpp"
#include "autoloss/schema.hpp"
#include "autoloss/tensor.hpp"

namespace autoloss {

// What the controller sees per example. The label+prediction form follows
// the framework's main formulation; prediction-only is the variant stated in
// the implementation notes. Both are supported; neither is hardwired.
enum class ControllerInput { y_and_pred, pred_only };

std::string controller_input_name(ControllerInput mode);
ControllerInput controller_input_from_name(const std::string& name);

struct ControllerConfig {
    std::size_t mlp_width = 128;
    std::size_t mlp_layers = 2;
    double dropout_rate = 0.2;
};

struct ControllerCache {
    MlpCache mlp;
    AffineCache out;
    SoftmaxCache softmax;
};

// Maps per-example (label, prediction) pairs to probabilities over the n
// candidate losses (softmax output, one row per example).
class Controller {
public:
    Controller(const TaskSpec& task, ControllerInput input_mode, std::size_t catalog_size,
               const ControllerConfig& cfg, std::uint64_t init_seed);

    // Builds the controller input from labels and (detached) predictions:
    // labels one-hot for classification, raw scalar for regression.
    static Tensor encode_input(std::span<const double> labels, const Tensor& preds,
                               const TaskSpec& task, ControllerInput mode);
    static std::size_t input_dim(const TaskSpec& task, ControllerInput mode);

    Tensor forward(const Tensor& input, bool train, RngStream* dropout_rng,
                   ControllerCache& cache);
    void backward(const Tensor& dalpha, const ControllerCache& cache);

    std::vector<NamedParam> named_params();
    std::vector<NamedBuffer> named_buffers();

    std::size_t catalog_size() const { return catalog_size_; }
    ControllerInput input_mode() const { return input_mode_; }
    const TaskSpec& task() const { return task_; }
    const ControllerConfig& config() const { return cfg_; }

private:
    TaskSpec task_;
    ControllerInput input_mode_;
    std::size_t catalog_size_;
    ControllerConfig cfg_;
    MlpTower mlp_;
    Parameter out_w_;
    Parameter out_b_;
};

}  // namespace autoloss
