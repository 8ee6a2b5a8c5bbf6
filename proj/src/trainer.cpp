#include "autoloss/trainer.hpp"

#include <chrono>
#include <cmath>

#include "autoloss/error.hpp"

namespace autoloss {

std::string train_mode_name(TrainMode mode) {
    switch (mode) {
        case TrainMode::autoloss:
            return "autoloss";
        case TrainMode::al1:
            return "al1";
        case TrainMode::al2:
            return "al2";
        case TrainMode::fixed:
            return "fixed";
    }
    throw ConfigError("train mode: unknown id");
}

TrainMode train_mode_from_name(const std::string& name) {
    if (name == "autoloss") return TrainMode::autoloss;
    if (name == "al1") return TrainMode::al1;
    if (name == "al2") return TrainMode::al2;
    if (name == "fixed") return TrainMode::fixed;
    throw ConfigError("train mode: unknown '" + name +
                      "' (expected autoloss|al1|al2|fixed)");
}

void TrainLoopConfig::validate() const {
    if (batch_size == 0) {
        throw ConfigError("train: batch size must be >= 1");
    }
    if (controller_every == 0) {
        throw ConfigError("train: controller update frequency must be >= 1");
    }
    if (virtual_step < 0.0) {
        throw ConfigError("train: virtual step must be >= 0");
    }
    if (total_steps == 0) {
        throw ConfigError("train: total steps must be >= 1");
    }
}

namespace {

bool mode_uses_controller(TrainMode mode) {
    return mode == TrainMode::autoloss || mode == TrainMode::al2;
}

}  // namespace

Trainer::Trainer(DrsModel& drs, Controller* controller, const LossCatalog& catalog,
                 const DatasetSplits& splits, const TrainLoopConfig& cfg)
    : drs_(drs),
      ctrl_(controller),
      catalog_(catalog),
      splits_(splits),
      cfg_(cfg),
      drs_params_(drs.named_params()),
      ctrl_params_(controller ? controller->named_params() : std::vector<NamedParam>{}),
      adam_drs_(drs_params_, AdamConfig{.learning_rate = cfg.lr_drs}),
      train_iter_(splits.train, cfg.batch_size, RngStream::derive(cfg.seeds.shuffle, "train"),
                  /*cyclic=*/true),
      val_iter_(splits.validation, cfg.batch_size,
                RngStream::derive(cfg.seeds.shuffle, "validation"), /*cyclic=*/true),
      dropout_rng_(RngStream::derive(cfg.seeds.dropout, "dropout")),
      gumbel_rng_(RngStream::derive(cfg.seeds.gumbel, "gumbel")) {
    cfg_.validate();
    catalog_.validate(/*allow_single=*/cfg_.mode == TrainMode::fixed);
    if (catalog_.task.kind != drs_.task().kind) {
        throw ConfigError("train: catalog task does not match model task");
    }
    if (mode_uses_controller(cfg_.mode)) {
        if (!ctrl_) {
            throw ConfigError("train: mode '" + train_mode_name(cfg_.mode) +
                              "' requires a controller");
        }
        if (ctrl_->catalog_size() != catalog_.size()) {
            throw ConfigError("train: controller output dimension " +
                              std::to_string(ctrl_->catalog_size()) +
                              " does not match catalog size " +
                              std::to_string(catalog_.size()));
        }
        if (!cfg_.freeze_controller) {
            adam_ctrl_.emplace(ctrl_params_, AdamConfig{.learning_rate = cfg_.lr_controller});
        }
    }
    if (splits.validation.empty() && controller_trained()) {
        throw ConfigError("train: controller updates need a validation split");
    }
    alpha_sum_.assign(catalog_.size(), 0.0);
    p_sum_.assign(catalog_.size(), 0.0);
}

bool Trainer::controller_trained() const {
    return mode_uses_controller(cfg_.mode) && !cfg_.freeze_controller;
}

Tensor Trainer::selection_probs(std::span<const double> labels, const Tensor& preds,
                                Phase phase, double tau, ControllerCache* ctrl_cache,
                                GumbelSoftmaxCache* gs_cache, Tensor* alpha_out) {
    const std::size_t batch = preds.rows();
    const std::size_t n = catalog_.size();

    if (cfg_.mode == TrainMode::fixed) {
        Tensor p = Tensor::full({batch, n}, 1.0);
        if (alpha_out) *alpha_out = p;
        return p;
    }
    if (cfg_.mode == TrainMode::al1) {
        Tensor p = Tensor::full({batch, n}, 1.0 / static_cast<double>(n));
        if (alpha_out) *alpha_out = p;
        return p;
    }

    // Controller runs in train mode only during its own update phase.
    const bool ctrl_train = phase == Phase::controller && controller_trained();
    Tensor input =
        Controller::encode_input(labels, preds, drs_.task(), ctrl_->input_mode());
    ControllerCache local_cache;
    ControllerCache& cache = ctrl_cache ? *ctrl_cache : local_cache;
    Tensor alpha =
        ctrl_->forward(input, ctrl_train, ctrl_train ? &dropout_rng_ : nullptr, cache);
    if (alpha_out) *alpha_out = alpha;

    if (cfg_.mode == TrainMode::al2) {
        return alpha;
    }
    Tensor noise = sample_gumbel(batch, n, gumbel_rng_);
    return gumbel_softmax(alpha, noise, tau, gs_cache);
}

void Trainer::accumulate_probs(const Tensor& alpha, const Tensor& probs) {
    const std::size_t batch = probs.rows();
    const std::size_t n = probs.cols();
    for (std::size_t i = 0; i < n; ++i) {
        double a = 0.0;
        double p = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
            a += alpha.at(b, i);
            p += probs.at(b, i);
        }
        alpha_sum_[i] += a / static_cast<double>(batch);
        p_sum_[i] += p / static_cast<double>(batch);
    }
    ++prob_batches_;
}

void Trainer::drs_update() {
    const double tau = temperature(drs_steps_);
    Batch batch = *train_iter_.next();

    DrsCache cache;
    Tensor preds = drs_.forward(batch, /*train=*/true, &dropout_rng_, cache);
    CandidateLossMatrix matrix = candidate_matrix(batch.labels, preds, catalog_);

    Tensor alpha;
    Tensor probs = selection_probs(batch.labels, preds, Phase::drs, tau, nullptr, nullptr,
                                   &alpha);
    const double loss = weighted_loss(probs, matrix.losses);
    if (!std::isfinite(loss)) {
        throw NumericError("train: non-finite training loss at step " +
                           std::to_string(drs_steps_ + 1));
    }

    Tensor dpred = weighted_loss_grad_pred(probs, matrix, preds.cols());
    drs_.backward(dpred, cache);
    adam_drs_.step(drs_params_);
    ++drs_steps_;

    accumulate_probs(alpha, probs);
}

void Trainer::controller_update() {
    if (!controller_trained()) {
        throw ConfigError("train: controller updates are disabled in this mode");
    }
    const double tau = temperature(drs_steps_);
    Batch val = *val_iter_.next();

    // xi > 0: evaluate the validation loss at a one-step lookahead
    // W' = W - xi * grad_W L_train, treating W' as constant when
    // backpropagating into the controller. W itself is never committed.
    std::vector<Tensor> saved_values;
    if (cfg_.virtual_step > 0.0) {
        Batch virt = *train_iter_.next();
        DrsCache vcache;
        Tensor vpreds = drs_.forward(virt, /*train=*/false, nullptr, vcache);
        CandidateLossMatrix vmatrix = candidate_matrix(virt.labels, vpreds, catalog_);
        Tensor vprobs =
            selection_probs(virt.labels, vpreds, Phase::drs, tau, nullptr, nullptr, nullptr);
        Tensor vdpred = weighted_loss_grad_pred(vprobs, vmatrix, vpreds.cols());
        drs_.backward(vdpred, vcache);

        saved_values.reserve(drs_params_.size());
        for (const NamedParam& p : drs_params_) {
            saved_values.push_back(p.param->value);
            for (std::size_t c = 0; c < p.param->value.size(); ++c) {
                p.param->value[c] -= cfg_.virtual_step * p.param->grad[c];
            }
            p.param->zero_grad();
        }
    }

    DrsCache cache;
    Tensor preds = drs_.forward(val, /*train=*/false, nullptr, cache);
    CandidateLossMatrix matrix = candidate_matrix(val.labels, preds, catalog_);

    ControllerCache ctrl_cache;
    GumbelSoftmaxCache gs_cache;
    Tensor probs = selection_probs(val.labels, preds, Phase::controller, tau, &ctrl_cache,
                                   &gs_cache, nullptr);
    const double loss = weighted_loss(probs, matrix.losses);
    if (!std::isfinite(loss)) {
        throw NumericError("train: non-finite validation loss at controller step " +
                           std::to_string(controller_steps_ + 1));
    }

    Tensor dprobs = weighted_loss_grad_probs(matrix.losses);
    Tensor dalpha = cfg_.mode == TrainMode::al2 ? dprobs
                                                : gumbel_softmax_backward(dprobs, gs_cache);
    ctrl_->backward(dalpha, ctrl_cache);
    adam_ctrl_->step(ctrl_params_);
    ++controller_steps_;

    if (!saved_values.empty()) {
        for (std::size_t i = 0; i < drs_params_.size(); ++i) {
            drs_params_[i].param->value = std::move(saved_values[i]);
        }
    }
}

MetricReport Trainer::evaluate(std::span<const EncodedExample> split) {
    if (split.empty()) {
        throw DataError("evaluate: empty split");
    }
    const std::size_t pred_dim = drs_.task().pred_dim();
    Tensor preds({split.size(), pred_dim});
    std::vector<double> labels(split.size());
    constexpr std::size_t kChunk = 2048;
    for (std::size_t start = 0; start < split.size(); start += kChunk) {
        const std::size_t len = std::min(kChunk, split.size() - start);
        Batch batch = make_batch(split.subspan(start, len));
        DrsCache cache;
        Tensor chunk = drs_.forward(batch, /*train=*/false, nullptr, cache);
        for (std::size_t b = 0; b < len; ++b) {
            labels[start + b] = batch.labels[b];
            for (std::size_t c = 0; c < pred_dim; ++c) {
                preds.at(start + b, c) = chunk.at(b, c);
            }
        }
    }
    return compute_metrics(labels, preds, drs_.task());
}

EvalRow Trainer::make_eval_row(double elapsed_ms, std::uint64_t steps_in_window) {
    EvalRow row;
    row.step = drs_steps_;
    row.split = "test";
    MetricReport report = evaluate(splits_.test);
    row.auc = report.auc;
    row.logloss = report.logloss;
    row.tau = temperature(drs_steps_);
    row.ms_per_step = steps_in_window ? elapsed_ms / static_cast<double>(steps_in_window) : 0.0;
    row.alpha_mean.assign(catalog_.size(), 0.0);
    row.p_mean.assign(catalog_.size(), 0.0);
    if (prob_batches_ > 0) {
        for (std::size_t i = 0; i < catalog_.size(); ++i) {
            row.alpha_mean[i] = alpha_sum_[i] / static_cast<double>(prob_batches_);
            row.p_mean[i] = p_sum_[i] / static_cast<double>(prob_batches_);
        }
    }
    std::fill(alpha_sum_.begin(), alpha_sum_.end(), 0.0);
    std::fill(p_sum_.begin(), p_sum_.end(), 0.0);
    prob_batches_ = 0;
    return row;
}

void Trainer::run(const EvalCallback& on_eval, const CheckpointCallback& on_checkpoint) {
    using clock = std::chrono::steady_clock;
    auto window_start = clock::now();
    std::uint64_t window_steps = 0;

    while (drs_steps_ < cfg_.total_steps) {
        if (cfg_.order == UpdateOrder::controller_first && controller_trained() &&
            drs_steps_ % cfg_.controller_every == 0) {
            controller_update();
        }
        drs_update();
        ++window_steps;
        if (cfg_.order == UpdateOrder::drs_first && controller_trained() &&
            drs_steps_ % cfg_.controller_every == 0) {
            controller_update();
        }

        const bool final_step = drs_steps_ == cfg_.total_steps;
        if ((cfg_.eval_every != 0 && drs_steps_ % cfg_.eval_every == 0) || final_step) {
            const double elapsed_ms =
                std::chrono::duration<double, std::milli>(clock::now() - window_start).count();
            EvalRow row = make_eval_row(elapsed_ms, window_steps);
            history_.push_back(row);
            if (on_eval) {
                on_eval(row);
            }
            window_start = clock::now();
            window_steps = 0;
        }
        if (cfg_.checkpoint_every != 0 && drs_steps_ % cfg_.checkpoint_every == 0 &&
            on_checkpoint) {
            on_checkpoint(drs_steps_);
        }
    }
}

}  // namespace autoloss
