#include "autoloss/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>

#include "autoloss/error.hpp"

namespace autoloss {

namespace fs = std::filesystem;

void RunConfig::validate() const {
    if (schema_path.empty() || csv_path.empty()) {
        throw ConfigError("config: schema and data paths are required");
    }
    if (out_dir.empty()) {
        throw ConfigError("config: output directory is required");
    }
    train.validate();
    if (mode == TrainMode::fixed && !loss_compatible(fixed_loss, TaskKind::binary) &&
        !loss_compatible(fixed_loss, TaskKind::regression)) {
        throw ConfigError("config: unknown fixed loss");
    }
}

std::vector<std::string> RunConfig::effective_catalog(const TaskSpec& task) const {
    if (mode == TrainMode::fixed) {
        return {std::string(loss_kind_name(fixed_loss))};
    }
    if (!catalog.empty()) {
        return catalog;
    }
    if (task.kind == TaskKind::regression) {
        return {"mse", "mae", "huber"};
    }
    return {"focal", "kl", "hinge", "ce"};
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["data"] = {{"schema", schema_path}, {"csv", csv_path}};
    j["model"] = {{"kind", drs_kind_name(model.kind)},
                  {"embedding_dim", model.embedding_dim},
                  {"mlp_width", model.mlp_width},
                  {"mlp_layers", model.mlp_layers},
                  {"dropout", model.dropout_rate}};
    j["catalog"] = catalog;
    j["loss_hyper"] = {{"focal_gamma", loss_hyper.focal_gamma},
                       {"huber_delta", loss_hyper.huber_delta},
                       {"label_noise_rate", loss_hyper.label_noise_rate},
                       {"kl_shift", loss_hyper.kl_shift}};
    j["mode"] = train_mode_name(mode);
    j["fixed_loss"] = std::string(loss_kind_name(fixed_loss));
    j["controller"] = {{"input_mode", controller_input_name(controller_input)},
                       {"mlp_width", controller.mlp_width},
                       {"mlp_layers", controller.mlp_layers},
                       {"dropout", controller.dropout_rate}};
    if (!frozen_controller_path.empty()) {
        j["frozen_controller"] = frozen_controller_path;
    }
    j["train"] = {{"batch_size", train.batch_size},
                  {"total_steps", train.total_steps},
                  {"lr_drs", train.lr_drs},
                  {"lr_controller", train.lr_controller},
                  {"controller_every", train.controller_every},
                  {"virtual_step", train.virtual_step},
                  {"order", train.order == UpdateOrder::drs_first ? "drs_first"
                                                                  : "controller_first"},
                  {"eval_every", train.eval_every},
                  {"checkpoint_every", train.checkpoint_every}};
    j["split"] = {{"train", split.train},
                  {"validation", split.validation},
                  {"test", split.test}};
    j["seeds"] = {{"init", train.seeds.init},
                  {"shuffle", train.seeds.shuffle},
                  {"dropout", train.seeds.dropout},
                  {"gumbel", train.seeds.gumbel}};
    j["out_dir"] = out_dir;
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig cfg;
    try {
        cfg.schema_path = j.at("data").at("schema").get<std::string>();
        cfg.csv_path = j.at("data").at("csv").get<std::string>();
        const auto& jm = j.at("model");
        cfg.model.kind = drs_kind_from_name(jm.at("kind").get<std::string>());
        cfg.model.embedding_dim = jm.value("embedding_dim", std::size_t{16});
        cfg.model.mlp_width = jm.value("mlp_width", std::size_t{128});
        cfg.model.mlp_layers = jm.value("mlp_layers", std::size_t{2});
        cfg.model.dropout_rate = jm.value("dropout", 0.2);
        cfg.catalog = j.value("catalog", std::vector<std::string>{});
        if (j.contains("loss_hyper")) {
            const auto& jh = j.at("loss_hyper");
            cfg.loss_hyper.focal_gamma = jh.value("focal_gamma", 2.0);
            cfg.loss_hyper.huber_delta = jh.value("huber_delta", 1.0);
            cfg.loss_hyper.label_noise_rate = jh.value("label_noise_rate", 0.9);
            cfg.loss_hyper.kl_shift = jh.value("kl_shift", 1.0);
        }
        cfg.mode = train_mode_from_name(j.value("mode", std::string("autoloss")));
        cfg.fixed_loss = loss_kind_from_name(j.value("fixed_loss", std::string("ce")));
        if (j.contains("controller")) {
            const auto& jc = j.at("controller");
            cfg.controller_input =
                controller_input_from_name(jc.value("input_mode", std::string("y_and_pred")));
            cfg.controller.mlp_width = jc.value("mlp_width", std::size_t{128});
            cfg.controller.mlp_layers = jc.value("mlp_layers", std::size_t{2});
            cfg.controller.dropout_rate = jc.value("dropout", 0.2);
        }
        cfg.frozen_controller_path = j.value("frozen_controller", std::string());
        const auto& jt = j.at("train");
        cfg.train.batch_size = jt.value("batch_size", std::size_t{256});
        cfg.train.total_steps = jt.value("total_steps", std::uint64_t{5000});
        cfg.train.lr_drs = jt.value("lr_drs", 0.001);
        cfg.train.lr_controller = jt.value("lr_controller", 0.001);
        cfg.train.controller_every = jt.value("controller_every", std::uint64_t{7});
        cfg.train.virtual_step = jt.value("virtual_step", 0.0);
        cfg.train.order = jt.value("order", std::string("drs_first")) == "controller_first"
                              ? UpdateOrder::controller_first
                              : UpdateOrder::drs_first;
        cfg.train.eval_every = jt.value("eval_every", std::uint64_t{500});
        cfg.train.checkpoint_every = jt.value("checkpoint_every", std::uint64_t{0});
        if (j.contains("split")) {
            const auto& js = j.at("split");
            cfg.split.train = js.value("train", 0.8);
            cfg.split.validation = js.value("validation", 0.1);
            cfg.split.test = js.value("test", 0.1);
        }
        if (j.contains("seeds")) {
            const auto& js = j.at("seeds");
            cfg.train.seeds.init = js.value("init", std::uint64_t{1});
            cfg.train.seeds.shuffle = js.value("shuffle", std::uint64_t{2});
            cfg.train.seeds.dropout = js.value("dropout", std::uint64_t{3});
            cfg.train.seeds.gumbel = js.value("gumbel", std::uint64_t{4});
        }
        cfg.out_dir = j.value("out_dir", std::string());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: malformed json: ") + e.what());
    }
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config: cannot open '" + path + "'");
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: cannot parse '" + path + "': " + e.what());
    }
    return from_json(j);
}

void RunConfig::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) {
        throw DataError("config: cannot write '" + path + "'");
    }
    out << to_json().dump(2) << '\n';
}

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void prepare_run_dir(const std::string& out_dir, bool force) {
    fs::path dir(out_dir);
    if (fs::exists(dir)) {
        if (!fs::is_directory(dir)) {
            throw ConfigError("run dir: '" + out_dir + "' exists and is not a directory");
        }
        if (!fs::is_empty(dir) && !force) {
            throw ConfigError("run dir: '" + out_dir +
                              "' is not empty; pass --force to overwrite");
        }
    } else {
        fs::create_directories(dir);
    }
}

nlohmann::json drs_config_json(const DrsConfig& cfg) {
    return {{"kind", drs_kind_name(cfg.kind)},
            {"embedding_dim", cfg.embedding_dim},
            {"mlp_width", cfg.mlp_width},
            {"mlp_layers", cfg.mlp_layers},
            {"dropout", cfg.dropout_rate}};
}

DrsConfig drs_config_from_json(const nlohmann::json& j) {
    DrsConfig cfg;
    cfg.kind = drs_kind_from_name(j.at("kind").get<std::string>());
    cfg.embedding_dim = j.at("embedding_dim").get<std::size_t>();
    cfg.mlp_width = j.at("mlp_width").get<std::size_t>();
    cfg.mlp_layers = j.at("mlp_layers").get<std::size_t>();
    cfg.dropout_rate = j.at("dropout").get<double>();
    return cfg;
}

void load_tensors_into(std::span<const NamedParam> params, std::span<const NamedBuffer> buffers,
                       const CheckpointPayload& payload) {
    for (const NamedParam& p : params) {
        const Tensor& stored = payload.find(p.name);
        if (!stored.same_shape(p.param->value)) {
            throw DataError("checkpoint: tensor '" + p.name + "' has shape " +
                            stored.shape_str() + ", model expects " +
                            p.param->value.shape_str());
        }
        p.param->value = stored;
        p.param->zero_grad();
    }
    for (const NamedBuffer& b : buffers) {
        const Tensor& stored = payload.find("buffer." + b.name);
        if (!stored.same_shape(*b.tensor)) {
            throw DataError("checkpoint: buffer '" + b.name + "' shape mismatch");
        }
        *b.tensor = stored;
    }
}

}  // namespace

CheckpointPayload drs_to_checkpoint(DrsModel& model, std::uint64_t schema_hash) {
    CheckpointPayload payload;
    payload.kind = "drs";
    payload.meta = {{"schema_hash", schema_hash},
                    {"task", task_to_string(model.task())},
                    {"model", drs_config_json(model.config())},
                    {"cardinalities", model.cardinalities()}};
    for (const NamedParam& p : model.named_params()) {
        payload.tensors.emplace_back(p.name, p.param->value);
    }
    for (const NamedBuffer& b : model.named_buffers()) {
        payload.tensors.emplace_back("buffer." + b.name, *b.tensor);
    }
    return payload;
}

std::unique_ptr<DrsModel> drs_from_checkpoint(const CheckpointPayload& payload,
                                              const FeatureSchema& schema) {
    if (payload.kind != "drs") {
        throw DataError("checkpoint: expected a drs checkpoint, got '" + payload.kind + "'");
    }
    const auto stored_hash = payload.meta.at("schema_hash").get<std::uint64_t>();
    if (stored_hash != schema.hash()) {
        throw DataError("checkpoint: schema hash mismatch (model was trained on a different "
                        "schema)");
    }
    DrsConfig cfg = drs_config_from_json(payload.meta.at("model"));
    auto model = std::make_unique<DrsModel>(schema, cfg, /*init_seed=*/0);
    auto params = model->named_params();
    auto buffers = model->named_buffers();
    load_tensors_into(params, buffers, payload);
    return model;
}

CheckpointPayload controller_to_checkpoint(Controller& controller,
                                           std::span<const std::string> catalog_names) {
    CheckpointPayload payload;
    payload.kind = "controller";
    payload.meta = {{"task", task_to_string(controller.task())},
                    {"input_mode", controller_input_name(controller.input_mode())},
                    {"input_dim", Controller::input_dim(controller.task(),
                                                        controller.input_mode())},
                    {"catalog",
                     std::vector<std::string>(catalog_names.begin(), catalog_names.end())},
                    {"config",
                     nlohmann::json{{"mlp_width", controller.config().mlp_width},
                                    {"mlp_layers", controller.config().mlp_layers},
                                    {"dropout", controller.config().dropout_rate}}}};
    for (const NamedParam& p : controller.named_params()) {
        payload.tensors.emplace_back(p.name, p.param->value);
    }
    for (const NamedBuffer& b : controller.named_buffers()) {
        payload.tensors.emplace_back("buffer." + b.name, *b.tensor);
    }
    return payload;
}

std::unique_ptr<Controller> controller_from_checkpoint(const CheckpointPayload& payload) {
    if (payload.kind != "controller") {
        throw DataError("checkpoint: expected a controller checkpoint, got '" + payload.kind +
                        "'");
    }
    TaskSpec task = task_from_string(payload.meta.at("task").get<std::string>());
    ControllerInput mode =
        controller_input_from_name(payload.meta.at("input_mode").get<std::string>());
    const auto catalog = payload.meta.at("catalog").get<std::vector<std::string>>();
    ControllerConfig cfg;
    const auto& jc = payload.meta.at("config");
    cfg.mlp_width = jc.at("mlp_width").get<std::size_t>();
    cfg.mlp_layers = jc.at("mlp_layers").get<std::size_t>();
    cfg.dropout_rate = jc.at("dropout").get<double>();
    auto controller = std::make_unique<Controller>(task, mode, catalog.size(), cfg,
                                                   /*init_seed=*/0);
    auto params = controller->named_params();
    auto buffers = controller->named_buffers();
    load_tensors_into(params, buffers, payload);
    return controller;
}

CheckpointPayload train_state_to_checkpoint(DrsModel& drs, Controller* controller,
                                            Trainer& trainer, std::uint64_t schema_hash) {
    CheckpointPayload payload;
    payload.kind = "train_state";
    payload.meta = {{"schema_hash", schema_hash},
                    {"drs_steps", trainer.drs_steps()},
                    {"controller_steps", trainer.controller_steps()},
                    {"adam_drs_steps", trainer.drs_adam().step_count()},
                    {"rng_dropout", trainer.dropout_rng().serialize_state()},
                    {"rng_gumbel", trainer.gumbel_rng().serialize_state()}};

    auto add_side = [&payload](const std::string& side, std::vector<NamedParam> params,
                               std::vector<NamedBuffer> buffers, AdamState* adam) {
        for (const NamedParam& p : params) {
            payload.tensors.emplace_back(side + "." + p.name, p.param->value);
        }
        for (const NamedBuffer& b : buffers) {
            payload.tensors.emplace_back(side + ".buffer." + b.name, *b.tensor);
        }
        if (adam) {
            auto m = adam->first_moments();
            auto v = adam->second_moments();
            for (std::size_t i = 0; i < params.size(); ++i) {
                payload.tensors.emplace_back(side + ".adam.m." + params[i].name, m[i]);
                payload.tensors.emplace_back(side + ".adam.v." + params[i].name, v[i]);
            }
        }
    };
    add_side("drs", drs.named_params(), drs.named_buffers(), &trainer.drs_adam());
    if (controller) {
        payload.meta["adam_ctrl_steps"] =
            trainer.controller_adam() ? trainer.controller_adam()->step_count() : 0;
        add_side("ctrl", controller->named_params(), controller->named_buffers(),
                 trainer.controller_adam());
    }
    return payload;
}

namespace {

struct RunContext {
    FeatureSchema schema;
    LossCatalog catalog;
    std::vector<std::string> catalog_names;
    std::unique_ptr<DrsModel> model;
    std::unique_ptr<Controller> controller;
};

RunContext build_run_context(const RunConfig& cfg, const FeatureSchema& schema) {
    RunContext ctx;
    ctx.schema = schema;
    ctx.catalog_names = cfg.effective_catalog(schema.task);
    ctx.catalog = LossCatalog::from_names(ctx.catalog_names, schema.task, cfg.loss_hyper);
    ctx.model = std::make_unique<DrsModel>(schema, cfg.model, cfg.train.seeds.init);

    const bool wants_controller =
        cfg.mode == TrainMode::autoloss || cfg.mode == TrainMode::al2;
    if (wants_controller) {
        if (!cfg.frozen_controller_path.empty()) {
            CheckpointPayload payload = load_checkpoint(cfg.frozen_controller_path);
            ctx.controller = controller_from_checkpoint(payload);
            if (ctx.controller->catalog_size() != ctx.catalog.size()) {
                throw ConfigError(
                    "transfer: controller selects among " +
                    std::to_string(ctx.controller->catalog_size()) +
                    " candidates, run catalog has " + std::to_string(ctx.catalog.size()));
            }
            const std::size_t want_dim =
                Controller::input_dim(schema.task, ctx.controller->input_mode());
            const auto have_dim = payload.meta.at("input_dim").get<std::size_t>();
            if (want_dim != have_dim) {
                throw ConfigError("transfer: controller input width " +
                                  std::to_string(have_dim) + " does not fit task " +
                                  task_to_string(schema.task) + " (needs " +
                                  std::to_string(want_dim) + ")");
            }
        } else {
            ctx.controller = std::make_unique<Controller>(
                schema.task, cfg.controller_input, ctx.catalog.size(), cfg.controller,
                RngStream::derive(cfg.train.seeds.init, "controller"));
        }
    }
    return ctx;
}

}  // namespace

RunResult run_training(const RunConfig& cfg, std::ostream* progress) {
    cfg.validate();
    FeatureSchema schema = FeatureSchema::load(cfg.schema_path);
    Dataset dataset = load_csv(cfg.csv_path, schema);
    return run_training(cfg, dataset, progress);
}

RunResult run_training(const RunConfig& cfg, const Dataset& dataset, std::ostream* progress) {
    cfg.validate();
    prepare_run_dir(cfg.out_dir, cfg.force);
    const fs::path dir(cfg.out_dir);

    RunConfig resolved = cfg;
    resolved.catalog = cfg.effective_catalog(dataset.schema.task);
    resolved.save((dir / "config.json").string());

    RunContext ctx = build_run_context(resolved, dataset.schema);
    DatasetSplits splits =
        split_dataset(dataset.examples, resolved.split, resolved.train.seeds.shuffle);

    TrainLoopConfig loop_cfg = resolved.train;
    loop_cfg.freeze_controller = !resolved.frozen_controller_path.empty();
    Trainer trainer(*ctx.model, ctx.controller.get(), ctx.catalog, splits, loop_cfg);

    std::ofstream runlog(dir / "runlog.csv");
    runlog << runlog_header(ctx.catalog.size()) << '\n';

    const std::uint64_t schema_hash = dataset.schema.hash();
    auto write_model_checkpoints = [&] {
        save_checkpoint((dir / "drs.ckpt").string(),
                        drs_to_checkpoint(*ctx.model, schema_hash));
        if (ctx.controller) {
            save_checkpoint((dir / "controller.ckpt").string(),
                            controller_to_checkpoint(*ctx.controller, ctx.catalog_names));
        }
    };

    try {
        trainer.run(
            [&](const EvalRow& row) {
                runlog << runlog_line(row) << '\n';
                runlog.flush();
                if (progress) {
                    (*progress) << "step " << row.step << " auc " << row.auc << " logloss "
                                << row.logloss << " tau " << row.tau << '\n';
                }
            },
            [&](std::uint64_t) { write_model_checkpoints(); });
    } catch (const NumericError&) {
        // Parameters are still the last finite state: the optimizer refuses
        // non-finite gradients before mutating anything.
        write_model_checkpoints();
        throw;
    }

    write_model_checkpoints();
    save_checkpoint((dir / "train_state.ckpt").string(),
                    train_state_to_checkpoint(*ctx.model, ctx.controller.get(), trainer,
                                              schema_hash));

    RunResult result;
    result.final_test = trainer.evaluate(splits.test);
    result.history = trainer.history();
    result.run_dir = cfg.out_dir;
    result.drs_steps = trainer.drs_steps();
    result.controller_steps = trainer.controller_steps();

    std::ofstream metrics(dir / "metrics.json");
    metrics << result.final_test.to_json().dump(2) << '\n';
    return result;
}

MetricReport evaluate_checkpoint(const std::string& drs_ckpt_path,
                                 const std::string& schema_path, const std::string& csv_path) {
    FeatureSchema schema = FeatureSchema::load(schema_path);
    Dataset dataset = load_csv(csv_path, schema);
    if (dataset.examples.empty()) {
        throw DataError("evaluate: no examples in '" + csv_path + "'");
    }
    CheckpointPayload payload = load_checkpoint(drs_ckpt_path);
    std::unique_ptr<DrsModel> model = drs_from_checkpoint(payload, schema);

    const std::size_t pred_dim = schema.task.pred_dim();
    const std::size_t n = dataset.examples.size();
    Tensor preds({n, pred_dim});
    std::vector<double> labels(n);
    constexpr std::size_t kChunk = 2048;
    for (std::size_t start = 0; start < n; start += kChunk) {
        const std::size_t len = std::min(kChunk, n - start);
        Batch batch = make_batch(std::span(dataset.examples).subspan(start, len));
        DrsCache cache;
        Tensor chunk = model->forward(batch, /*train=*/false, nullptr, cache);
        for (std::size_t b = 0; b < len; ++b) {
            labels[start + b] = batch.labels[b];
            for (std::size_t c = 0; c < pred_dim; ++c) {
                preds.at(start + b, c) = chunk.at(b, c);
            }
        }
    }
    return compute_metrics(labels, preds, schema.task);
}

std::vector<SweepRow> run_sweep_f(const RunConfig& base, std::span<const std::uint64_t> fs,
                                  const std::string& out_dir, std::ostream* progress) {
    if (fs.size() < 2) {
        throw ConfigError("sweep: need at least 2 frequency values");
    }
    base.validate();
    prepare_run_dir(out_dir, base.force);

    FeatureSchema schema = FeatureSchema::load(base.schema_path);
    Dataset dataset = load_csv(base.csv_path, schema);

    std::vector<SweepRow> rows;
    for (std::uint64_t f : fs) {
        RunConfig cfg = base;
        cfg.train.controller_every = f;
        cfg.out_dir = (fs::path(out_dir) / ("f" + std::to_string(f))).string();
        if (progress) {
            (*progress) << "sweep: f=" << f << '\n';
        }
        const auto start = std::chrono::steady_clock::now();
        RunResult result = run_training(cfg, dataset, progress);
        const double wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                .count();
        rows.push_back({f, result.final_test.auc, result.final_test.logloss,
                        result.controller_steps, wall_ms});
    }

    std::ofstream merged(fs::path(out_dir) / "sweep.csv");
    merged << "f,auc,logloss,controller_updates,wall_ms\n";
    for (const SweepRow& r : rows) {
        merged << r.f << ',' << format_double(r.auc) << ',' << format_double(r.logloss) << ','
               << r.controller_updates << ',' << format_double(r.wall_ms) << '\n';
    }
    return rows;
}

std::string runlog_header(std::size_t catalog_size) {
    std::string header = "step,split,auc,logloss,tau,ms_per_step";
    for (std::size_t i = 0; i < catalog_size; ++i) {
        header += ",alpha_mean_" + std::to_string(i);
    }
    for (std::size_t i = 0; i < catalog_size; ++i) {
        header += ",p_mean_" + std::to_string(i);
    }
    return header;
}

std::string runlog_line(const EvalRow& row) {
    std::string line = std::to_string(row.step) + ',' + row.split + ',' +
                       format_double(row.auc) + ',' + format_double(row.logloss) + ',' +
                       format_double(row.tau) + ',' + format_double(row.ms_per_step);
    for (double a : row.alpha_mean) {
        line += ',' + format_double(a);
    }
    for (double p : row.p_mean) {
        line += ',' + format_double(p);
    }
    return line;
}

}  // namespace autoloss
