#include "autoloss/controller.hpp"

#include "autoloss/error.hpp"

namespace autoloss {

std::string controller_input_name(ControllerInput mode) {
    return mode == ControllerInput::y_and_pred ? "y_and_pred" : "pred_only";
}

ControllerInput controller_input_from_name(const std::string& name) {
    if (name == "y_and_pred") return ControllerInput::y_and_pred;
    if (name == "pred_only") return ControllerInput::pred_only;
    throw ConfigError("controller: unknown input mode '" + name +
                      "' (expected y_and_pred|pred_only)");
}

std::size_t Controller::input_dim(const TaskSpec& task, ControllerInput mode) {
    const std::size_t pred = task.pred_dim();
    if (mode == ControllerInput::pred_only) {
        return pred;
    }
    switch (task.kind) {
        case TaskKind::binary:
            return 2 + pred;  // one-hot over {0,1} plus the prediction
        case TaskKind::multiclass:
            return task.num_classes + pred;
        case TaskKind::regression:
            return 1 + pred;
    }
    throw ConfigError("controller: unknown task kind");
}

Tensor Controller::encode_input(std::span<const double> labels, const Tensor& preds,
                                const TaskSpec& task, ControllerInput mode) {
    const std::size_t batch = preds.rows();
    if (labels.size() != batch) {
        throw DimError("controller: labels/prediction batch size mismatch");
    }
    const std::size_t pred = preds.cols();
    if (pred != task.pred_dim()) {
        throw DimError("controller: prediction " + preds.shape_str() +
                       " does not match task " + task_to_string(task));
    }
    const std::size_t in = input_dim(task, mode);
    Tensor x({batch, in});
    for (std::size_t b = 0; b < batch; ++b) {
        double* row = x.data() + b * in;
        std::size_t off = 0;
        if (mode == ControllerInput::y_and_pred) {
            if (task.kind == TaskKind::regression) {
                row[off++] = labels[b];
            } else {
                const std::size_t k = task.kind == TaskKind::binary ? 2 : task.num_classes;
                const auto cls = static_cast<std::size_t>(labels[b]);
                if (cls >= k) {
                    throw DataError("controller: label " + std::to_string(labels[b]) +
                                    " out of range for " + std::to_string(k) + " classes");
                }
                row[off + cls] = 1.0;
                off += k;
            }
        }
        for (std::size_t c = 0; c < pred; ++c) {
            row[off + c] = preds.at(b, c);
        }
    }
    return x;
}

Controller::Controller(const TaskSpec& task, ControllerInput input_mode,
                       std::size_t catalog_size, const ControllerConfig& cfg,
                       std::uint64_t init_seed)
    : task_(task),
      input_mode_(input_mode),
      catalog_size_(catalog_size),
      cfg_(cfg),
      mlp_([&] {
          RngStream tmp(RngStream::derive(init_seed, "ctrl-mlp"));
          return MlpTower(input_dim(task, input_mode), cfg.mlp_width, cfg.mlp_layers,
                          cfg.dropout_rate, tmp);
      }()),
      out_w_(Tensor({cfg.mlp_width, catalog_size})),
      out_b_(Tensor({catalog_size})) {
    if (catalog_size_ < 2) {
        throw ConfigError("controller: catalog must have at least 2 candidates");
    }
    RngStream head_rng(RngStream::derive(init_seed, "ctrl-head"));
    init_glorot_uniform(out_w_.value, cfg_.mlp_width, catalog_size_, head_rng);
}

Tensor Controller::forward(const Tensor& input, bool train, RngStream* dropout_rng,
                           ControllerCache& cache) {
    if (input.cols() != mlp_.in_dim()) {
        throw ConfigError("controller: input width " + std::to_string(input.cols()) +
                          " does not match expected " + std::to_string(mlp_.in_dim()));
    }
    Tensor h = mlp_.forward(input, train, dropout_rng, cache.mlp);
    Tensor logits = affine_forward(h, out_w_, out_b_, cache.out);
    return softmax_forward(logits, cache.softmax);
}

void Controller::backward(const Tensor& dalpha, const ControllerCache& cache) {
    Tensor dlogits = softmax_backward(dalpha, cache.softmax);
    Tensor dh = affine_backward(dlogits, cache.out, out_w_, out_b_);
    mlp_.backward(dh, cache.mlp);
}

std::vector<NamedParam> Controller::named_params() {
    std::vector<NamedParam> out;
    mlp_.collect_params("mlp", out);
    out.push_back({"out.weight", &out_w_});
    out.push_back({"out.bias", &out_b_});
    return out;
}

std::vector<NamedBuffer> Controller::named_buffers() {
    std::vector<NamedBuffer> out;
    mlp_.collect_buffers("mlp", out);
    return out;
}

}  // namespace autoloss
