#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "autoloss/checkpoint.hpp"
#include "autoloss/controller.hpp"
#include "autoloss/dataset.hpp"
#include "autoloss/drs.hpp"
#include "autoloss/losses.hpp"
#include "autoloss/metrics.hpp"
#include "autoloss/trainer.hpp"

namespace autoloss {

// Fully resolved description of one training run. Serialized verbatim into
// the run directory; re-running a saved config reproduces the run bitwise.
struct RunConfig {
    std::string schema_path;
    std::string csv_path;

    DrsConfig model;
    std::vector<std::string> catalog;  // empty = task default
    LossHyper loss_hyper;

    TrainMode mode = TrainMode::autoloss;
    LossKind fixed_loss = LossKind::cross_entropy;

    ControllerConfig controller;
    ControllerInput controller_input = ControllerInput::y_and_pred;
    std::string frozen_controller_path;  // transfer runs load and freeze this

    TrainLoopConfig train;
    SplitRatios split;

    std::string out_dir;
    bool force = false;  // allow writing into a non-empty run directory (not serialized)

    void validate() const;
    std::vector<std::string> effective_catalog(const TaskSpec& task) const;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::string& path);
    void save(const std::string& path) const;
};

struct RunResult {
    MetricReport final_test;
    std::vector<EvalRow> history;
    std::string run_dir;
    std::uint64_t drs_steps = 0;
    std::uint64_t controller_steps = 0;
};

// Executes a full training run and writes the run directory:
//   config.json, runlog.csv, metrics.json, drs.ckpt,
//   controller.ckpt + train_state.ckpt where applicable.
// On divergence the last-good model checkpoints are written before the
// NumericError propagates.
RunResult run_training(const RunConfig& cfg, std::ostream* progress = nullptr);
// Same, with a pre-loaded dataset (must match the config's schema).
RunResult run_training(const RunConfig& cfg, const Dataset& dataset,
                       std::ostream* progress = nullptr);

// Model checkpoint helpers.
CheckpointPayload drs_to_checkpoint(DrsModel& model, std::uint64_t schema_hash);
std::unique_ptr<DrsModel> drs_from_checkpoint(const CheckpointPayload& payload,
                                              const FeatureSchema& schema);
CheckpointPayload controller_to_checkpoint(Controller& controller,
                                           std::span<const std::string> catalog_names);
std::unique_ptr<Controller> controller_from_checkpoint(const CheckpointPayload& payload);

// Train-state container: model + optimizer moments + step counters + noise
// stream states; round-trips bitwise.
CheckpointPayload train_state_to_checkpoint(DrsModel& drs, Controller* controller,
                                            Trainer& trainer, std::uint64_t schema_hash);

// Evaluates a DRS checkpoint against every row of a CSV.
MetricReport evaluate_checkpoint(const std::string& drs_ckpt_path,
                                 const std::string& schema_path, const std::string& csv_path);

struct SweepRow {
    std::uint64_t f = 0;
    double auc = 0.0;
    double logloss = 0.0;
    std::uint64_t controller_updates = 0;
    double wall_ms = 0.0;
};

// One run per controller frequency, shared seeds; merged CSV in out_dir.
std::vector<SweepRow> run_sweep_f(const RunConfig& base, std::span<const std::uint64_t> fs,
                                  const std::string& out_dir, std::ostream* progress = nullptr);

// Fixed run-log column layout (step,split,auc,logloss,tau,ms_per_step,
// alpha_mean_i...,p_mean_i...).
std::string runlog_header(std::size_t catalog_size);
std::string runlog_line(const EvalRow& row);

}  // namespace autoloss
