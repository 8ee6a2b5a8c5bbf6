// Command-line driver: synthetic data generation, training in all modes,
// checkpoint evaluation, controller transfer and controller-frequency sweeps.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "autoloss/error.hpp"
#include "autoloss/experiment.hpp"
#include "autoloss/synth.hpp"

namespace fs = std::filesystem;
using namespace autoloss;

namespace {

// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric error.
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct TrainFlags {
    std::string config_path;
    std::string schema;
    std::string csv;
    std::string out_dir;
    std::string model = "deepfm";
    std::string mode = "autoloss";
    std::string fixed_loss = "ce";
    std::vector<std::string> catalog;
    std::string controller_input = "y_and_pred";
    std::size_t batch_size = 256;
    std::uint64_t steps = 5000;
    double lr = 0.001;
    double lr_controller = 0.001;
    std::uint64_t controller_every = 7;
    double virtual_step = 0.0;
    std::string order = "drs_first";
    std::uint64_t eval_every = 500;
    std::uint64_t checkpoint_every = 0;
    std::uint64_t seed = 1;
    std::size_t embedding_dim = 16;
    bool force = false;
};

void add_train_flags(CLI::App* cmd, TrainFlags& flags, bool with_mode) {
    cmd->add_option("--config", flags.config_path,
                    "JSON run config; explicit flags override its fields");
    cmd->add_option("--schema", flags.schema, "schema json path");
    cmd->add_option("--data", flags.csv, "dataset csv path");
    cmd->add_option("--out", flags.out_dir, "run output directory");
    cmd->add_option("--model", flags.model, "deepfm|ipnn");
    if (with_mode) {
        cmd->add_option("--mode", flags.mode, "autoloss|al1|al2|fixed");
        cmd->add_option("--fixed-loss", flags.fixed_loss,
                        "loss for --mode fixed (ce|focal|hinge|kl|mse|mae|huber)");
    }
    cmd->add_option("--catalog", flags.catalog, "candidate loss names, in order");
    cmd->add_option("--controller-input", flags.controller_input, "y_and_pred|pred_only");
    cmd->add_option("--batch-size", flags.batch_size, "mini-batch size");
    cmd->add_option("--steps", flags.steps, "number of DRS updates");
    cmd->add_option("--lr", flags.lr, "DRS learning rate");
    cmd->add_option("--lr-controller", flags.lr_controller, "controller learning rate");
    cmd->add_option("--controller-every", flags.controller_every,
                    "DRS updates per controller update (f)");
    cmd->add_option("--virtual-step", flags.virtual_step,
                    "xi for the one-step lookahead (0 = first-order)");
    cmd->add_option("--order", flags.order, "drs_first|controller_first");
    cmd->add_option("--eval-every", flags.eval_every, "steps between test evaluations");
    cmd->add_option("--checkpoint-every", flags.checkpoint_every,
                    "steps between checkpoint writes (0 = final only)");
    cmd->add_option("--seed", flags.seed, "base seed; derives init/shuffle/dropout/gumbel");
    cmd->add_option("--embedding-dim", flags.embedding_dim, "embedding size");
    cmd->add_flag("--force", flags.force, "allow writing into a non-empty run directory");
}

RunConfig build_run_config(const TrainFlags& flags, const CLI::App* cmd, bool with_mode) {
    RunConfig cfg;
    if (!flags.config_path.empty()) {
        cfg = RunConfig::load(flags.config_path);
    }
    auto given = [cmd](const std::string& name) { return cmd->count(name) > 0; };

    if (given("--schema")) cfg.schema_path = flags.schema;
    if (given("--data")) cfg.csv_path = flags.csv;
    if (given("--out")) cfg.out_dir = flags.out_dir;
    if (given("--model")) cfg.model.kind = drs_kind_from_name(flags.model);
    if (with_mode && given("--mode")) cfg.mode = train_mode_from_name(flags.mode);
    if (with_mode && given("--fixed-loss"))
        cfg.fixed_loss = loss_kind_from_name(flags.fixed_loss);
    if (given("--catalog")) cfg.catalog = flags.catalog;
    if (given("--controller-input"))
        cfg.controller_input = controller_input_from_name(flags.controller_input);
    if (given("--batch-size")) cfg.train.batch_size = flags.batch_size;
    if (given("--steps")) cfg.train.total_steps = flags.steps;
    if (given("--lr")) cfg.train.lr_drs = flags.lr;
    if (given("--lr-controller")) cfg.train.lr_controller = flags.lr_controller;
    if (given("--controller-every")) cfg.train.controller_every = flags.controller_every;
    if (given("--virtual-step")) cfg.train.virtual_step = flags.virtual_step;
    if (given("--order"))
        cfg.train.order = flags.order == "controller_first" ? UpdateOrder::controller_first
                                                            : UpdateOrder::drs_first;
    if (given("--eval-every")) cfg.train.eval_every = flags.eval_every;
    if (given("--checkpoint-every")) cfg.train.checkpoint_every = flags.checkpoint_every;
    if (given("--embedding-dim")) cfg.model.embedding_dim = flags.embedding_dim;
    if (given("--seed")) {
        cfg.train.seeds.init = RngStream::derive(flags.seed, "init");
        cfg.train.seeds.shuffle = RngStream::derive(flags.seed, "shuffle");
        cfg.train.seeds.dropout = RngStream::derive(flags.seed, "dropout");
        cfg.train.seeds.gumbel = RngStream::derive(flags.seed, "gumbel");
    }
    cfg.force = flags.force;
    return cfg;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"AutoLoss: per-example loss-function selection for deep recommenders"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate a planted-structure dataset");
    SynthConfig synth_cfg;
    std::string synth_task = "binary";
    std::string synth_out;
    synth->add_option("--fields", synth_cfg.num_fields, "number of feature fields")
        ->capture_default_str();
    synth->add_option("--cardinality", synth_cfg.cardinalities,
                      "values per field (one entry broadcasts)")
        ->capture_default_str();
    synth->add_option("--numeric-fields", synth_cfg.num_numeric,
                      "how many leading fields emit bucketized floats");
    synth->add_option("--count", synth_cfg.count, "number of examples")->capture_default_str();
    synth->add_option("--task", synth_task, "binary|multiclass:k|regression")
        ->capture_default_str();
    synth->add_option("--seed", synth_cfg.seed, "generator seed")->capture_default_str();
    synth->add_option("--label-noise", synth_cfg.label_noise,
                      "flip rate (classification) or noise sigma (regression)")
        ->capture_default_str();
    synth->add_option("--latent-dim", synth_cfg.latent_dim, "planted interaction rank")
        ->capture_default_str();
    synth->add_option("--out", synth_out, "output directory for data.csv + schema.json")
        ->required();

    // ---- train ----
    auto* train = app.add_subcommand("train", "run a training configuration");
    TrainFlags train_flags;
    add_train_flags(train, train_flags, /*with_mode=*/true);

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "evaluate a DRS checkpoint on a csv");
    std::string eval_ckpt, eval_schema, eval_csv, eval_out;
    eval->add_option("--checkpoint", eval_ckpt, "drs checkpoint path")->required();
    eval->add_option("--schema", eval_schema, "schema json path")->required();
    eval->add_option("--data", eval_csv, "dataset csv path")->required();
    eval->add_option("--out", eval_out, "optional metrics json output path");

    // ---- transfer ----
    auto* transfer =
        app.add_subcommand("transfer", "train a fresh DRS under a frozen controller");
    TrainFlags transfer_flags;
    std::string transfer_ckpt;
    transfer->add_option("--controller", transfer_ckpt, "controller checkpoint to freeze")
        ->required();
    add_train_flags(transfer, transfer_flags, /*with_mode=*/false);

    // ---- sweep-f ----
    auto* sweep = app.add_subcommand("sweep-f", "one run per controller update frequency");
    TrainFlags sweep_flags;
    std::vector<std::uint64_t> sweep_fs;
    std::string sweep_out;
    sweep->add_option("--f", sweep_fs, "frequencies to sweep")->required();
    sweep->add_option("--sweep-out", sweep_out, "sweep output directory")->required();
    add_train_flags(sweep, sweep_flags, /*with_mode=*/true);

    CLI11_PARSE(app, argc, argv);

    if (synth->parsed()) {
        synth_cfg.task = task_from_string(synth_task);
        SynthData data = generate_synth_raw(synth_cfg);
        fs::create_directories(synth_out);
        write_synth_csv(data, (fs::path(synth_out) / "data.csv").string());
        data.schema.save((fs::path(synth_out) / "schema.json").string());
        std::cout << "wrote " << data.rows.size() << " examples to " << synth_out << '\n';
        return 0;
    }
    if (train->parsed()) {
        RunConfig cfg = build_run_config(train_flags, train, true);
        RunResult result = run_training(cfg, &std::cout);
        std::cout << "final test auc " << result.final_test.auc << " logloss "
                  << result.final_test.logloss << '\n';
        return 0;
    }
    if (eval->parsed()) {
        MetricReport report = evaluate_checkpoint(eval_ckpt, eval_schema, eval_csv);
        std::string text = report.to_json().dump(2);
        std::cout << text << '\n';
        if (!eval_out.empty()) {
            std::ofstream out(eval_out);
            out << text << '\n';
        }
        return 0;
    }
    if (transfer->parsed()) {
        RunConfig cfg = build_run_config(transfer_flags, transfer, false);
        cfg.mode = TrainMode::autoloss;
        cfg.frozen_controller_path = transfer_ckpt;
        RunResult result = run_training(cfg, &std::cout);
        std::cout << "final test auc " << result.final_test.auc << " logloss "
                  << result.final_test.logloss << '\n';
        return 0;
    }
    if (sweep->parsed()) {
        RunConfig cfg = build_run_config(sweep_flags, sweep, true);
        auto rows = run_sweep_f(cfg, sweep_fs, sweep_out, &std::cout);
        for (const SweepRow& r : rows) {
            std::cout << "f=" << r.f << " auc=" << r.auc << " logloss=" << r.logloss
                      << " controller_updates=" << r.controller_updates << '\n';
        }
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
