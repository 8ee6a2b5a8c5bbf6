#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "autoloss/adam.hpp"
#include "autoloss/controller.hpp"
#include "autoloss/dataset.hpp"
#include "autoloss/drs.hpp"
#include "autoloss/gumbel.hpp"
#include "autoloss/losses.hpp"
#include "autoloss/metrics.hpp"

namespace autoloss {

// Training regimes:
//   autoloss  controller + gumbel-softmax selection (the full method)
//   al2       controller output used directly, no gumbel noise
//   al1       fixed uniform weights over candidates, controller never updated
//   fixed     single-candidate catalog, plain supervised training
enum class TrainMode { autoloss, al1, al2, fixed };

std::string train_mode_name(TrainMode mode);
TrainMode train_mode_from_name(const std::string& name);

enum class UpdateOrder { drs_first, controller_first };

struct SeedTuple {
    std::uint64_t init = 1;
    std::uint64_t shuffle = 2;
    std::uint64_t dropout = 3;
    std::uint64_t gumbel = 4;
};

struct TrainLoopConfig {
    std::size_t batch_size = 256;
    std::uint64_t total_steps = 5000;  // number of DRS updates
    double lr_drs = 0.001;
    double lr_controller = 0.001;
    std::uint64_t controller_every = 7;  // f: DRS updates per controller update
    double virtual_step = 0.0;           // xi; 0 = first-order approximation
    TrainMode mode = TrainMode::autoloss;
    UpdateOrder order = UpdateOrder::drs_first;
    std::uint64_t eval_every = 500;       // 0 = final evaluation only
    std::uint64_t checkpoint_every = 0;   // 0 = no periodic checkpoints
    SeedTuple seeds;
    bool freeze_controller = false;  // transfer runs: selection active, no updates

    void validate() const;
};

struct EvalRow {
    std::uint64_t step = 0;
    std::string split;
    double auc = 0.0;
    double logloss = 0.0;
    std::vector<double> alpha_mean;  // controller output, averaged over train batches
    std::vector<double> p_mean;      // selection probabilities, ditto
    double tau = 0.0;
    double ms_per_step = 0.0;
};

// Alternating bi-level loop: f DRS updates per controller update. The party
// being updated runs its network in train mode; the frozen party runs in
// eval mode, which keeps batchnorm statistics (part of the parameter state)
// bitwise intact across the other side's updates.
class Trainer {
public:
    Trainer(DrsModel& drs, Controller* controller, const LossCatalog& catalog,
            const DatasetSplits& splits, const TrainLoopConfig& cfg);

    using EvalCallback = std::function<void(const EvalRow&)>;
    using CheckpointCallback = std::function<void(std::uint64_t step)>;

    void run(const EvalCallback& on_eval = {}, const CheckpointCallback& on_checkpoint = {});

    // Single phases, exposed for tests and fine-grained drivers.
    void drs_update();
    void controller_update();

    MetricReport evaluate(std::span<const EncodedExample> split);

    std::uint64_t drs_steps() const { return drs_steps_; }
    std::uint64_t controller_steps() const { return controller_steps_; }
    double current_tau() const { return temperature(drs_steps_); }
    bool controller_trained() const;
    const std::vector<EvalRow>& history() const { return history_; }
    const LossCatalog& catalog() const { return catalog_; }

    AdamState& drs_adam() { return adam_drs_; }
    AdamState* controller_adam() { return adam_ctrl_ ? &*adam_ctrl_ : nullptr; }
    RngStream& dropout_rng() { return dropout_rng_; }
    RngStream& gumbel_rng() { return gumbel_rng_; }

private:
    // Controls which network(s) run in train mode during a phase.
    enum class Phase { drs, controller };

    Tensor selection_probs(std::span<const double> labels, const Tensor& preds, Phase phase,
                           double tau, ControllerCache* ctrl_cache, GumbelSoftmaxCache* gs_cache,
                           Tensor* alpha_out);
    void accumulate_probs(const Tensor& alpha, const Tensor& probs);
    EvalRow make_eval_row(double elapsed_ms, std::uint64_t steps_in_window);

    DrsModel& drs_;
    Controller* ctrl_;
    LossCatalog catalog_;
    const DatasetSplits& splits_;
    TrainLoopConfig cfg_;

    std::vector<NamedParam> drs_params_;
    std::vector<NamedParam> ctrl_params_;
    AdamState adam_drs_;
    std::optional<AdamState> adam_ctrl_;

    BatchIterator train_iter_;
    BatchIterator val_iter_;
    RngStream dropout_rng_;
    RngStream gumbel_rng_;

    std::uint64_t drs_steps_ = 0;
    std::uint64_t controller_steps_ = 0;

    std::vector<double> alpha_sum_;
    std::vector<double> p_sum_;
    std::uint64_t prob_batches_ = 0;

    std::vector<EvalRow> history_;
};

}  // namespace autoloss
