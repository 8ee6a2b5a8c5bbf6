#include <doctest.h>

#include <cmath>

#include "autoloss/controller.hpp"
#include "autoloss/error.hpp"
#include "autoloss/grad_check.hpp"
#include "autoloss/rng.hpp"

using namespace autoloss;

TEST_SUITE_BEGIN("controller");

namespace {

constexpr TaskSpec kBinary{TaskKind::binary, 2};

Tensor binary_preds(std::size_t batch, RngStream& rng) {
    Tensor preds({batch, 1});
    for (std::size_t b = 0; b < batch; ++b) preds[b] = 0.1 + 0.8 * rng.uniform01();
    return preds;
}

}  // namespace

TEST_CASE("input encoding widths per task and mode") {
    CHECK(Controller::input_dim(kBinary, ControllerInput::y_and_pred) == 3);
    CHECK(Controller::input_dim(kBinary, ControllerInput::pred_only) == 1);
    CHECK(Controller::input_dim({TaskKind::multiclass, 5}, ControllerInput::y_and_pred) == 10);
    CHECK(Controller::input_dim({TaskKind::multiclass, 5}, ControllerInput::pred_only) == 5);
    CHECK(Controller::input_dim({TaskKind::regression, 0}, ControllerInput::y_and_pred) == 2);
    CHECK(Controller::input_dim({TaskKind::regression, 0}, ControllerInput::pred_only) == 1);
}

TEST_CASE("input encoding one-hots the label and appends the prediction") {
    std::vector<double> labels = {1.0, 0.0};
    Tensor preds({2, 1}, {0.8, 0.3});
    Tensor x = Controller::encode_input(labels, preds, kBinary, ControllerInput::y_and_pred);
    CHECK(x.shape() == std::vector<std::size_t>{2, 3});
    CHECK(x.at(0, 0) == 0.0);
    CHECK(x.at(0, 1) == 1.0);
    CHECK(x.at(0, 2) == 0.8);
    CHECK(x.at(1, 0) == 1.0);
    CHECK(x.at(1, 1) == 0.0);
    CHECK(x.at(1, 2) == 0.3);

    Tensor p_only = Controller::encode_input(labels, preds, kBinary, ControllerInput::pred_only);
    CHECK(p_only.shape() == std::vector<std::size_t>{2, 1});
    CHECK(p_only[0] == 0.8);
}

TEST_CASE("output rows are a softmax over the catalog") {
    Controller ctrl(kBinary, ControllerInput::y_and_pred, 4, {}, 3);
    RngStream rng(1);
    const std::size_t batch = 12;
    std::vector<double> labels(batch);
    for (auto& y : labels) y = rng.uniform01() < 0.5 ? 0.0 : 1.0;
    Tensor preds = binary_preds(batch, rng);
    Tensor input = Controller::encode_input(labels, preds, kBinary, ctrl.input_mode());
    ControllerCache cache;
    Tensor alpha = ctrl.forward(input, false, nullptr, cache);
    CHECK(alpha.shape() == std::vector<std::size_t>{batch, 4});
    for (std::size_t b = 0; b < batch; ++b) {
        double sum = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(alpha.at(b, i) > 0.0);
            sum += alpha.at(b, i);
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("duplicated examples produce duplicated rows in eval mode") {
    Controller ctrl(kBinary, ControllerInput::y_and_pred, 3, {}, 5);
    std::vector<double> labels = {1.0, 1.0, 0.0};
    Tensor preds({3, 1}, {0.42, 0.42, 0.9});
    Tensor input = Controller::encode_input(labels, preds, kBinary, ctrl.input_mode());
    ControllerCache cache;
    Tensor alpha = ctrl.forward(input, false, nullptr, cache);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(alpha.at(0, i) == alpha.at(1, i));
    }
}

TEST_CASE("catalog size below two and input width mismatches are rejected") {
    CHECK_THROWS_AS(Controller(kBinary, ControllerInput::y_and_pred, 1, {}, 1), ConfigError);

    Controller ctrl(kBinary, ControllerInput::y_and_pred, 4, {}, 1);
    ControllerCache cache;
    Tensor wrong({2, 5});
    CHECK_THROWS_AS(ctrl.forward(wrong, false, nullptr, cache), ConfigError);
}

TEST_CASE("controller gradients match finite differences in eval mode") {
    ControllerConfig cfg;
    cfg.mlp_width = 8;
    Controller ctrl(kBinary, ControllerInput::y_and_pred, 4, cfg, 9);
    RngStream rng(2);
    const std::size_t batch = 5;
    std::vector<double> labels(batch);
    for (auto& y : labels) y = rng.uniform01() < 0.5 ? 0.0 : 1.0;
    Tensor preds = binary_preds(batch, rng);
    Tensor input = Controller::encode_input(labels, preds, kBinary, ctrl.input_mode());
    Tensor weights({batch, 4});
    for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = rng.gaussian();

    auto named = ctrl.named_params();
    std::vector<Parameter*> params;
    for (auto& p : named) params.push_back(p.param);

    auto loss = [&](bool with_grad) {
        ControllerCache cache;
        Tensor alpha = ctrl.forward(input, false, nullptr, cache);
        double l = 0.0;
        for (std::size_t i = 0; i < alpha.size(); ++i) l += weights[i] * alpha[i];
        if (with_grad) {
            ctrl.backward(weights, cache);
        }
        return l;
    };
    GradCheckReport report = gradient_check(loss, params);
    CHECK(report.checked > 0);
    CHECK(report.max_rel_err < 1e-4);
}

TEST_SUITE_END();
