#include <doctest.h>

#include <cmath>

#include "autoloss/error.hpp"
#include "autoloss/grad_check.hpp"
#include "autoloss/losses.hpp"
#include "autoloss/rng.hpp"

using namespace autoloss;

TEST_SUITE_BEGIN("losses");

namespace {

constexpr TaskSpec kBinary{TaskKind::binary, 2};
constexpr TaskSpec kFiveClass{TaskKind::multiclass, 5};
constexpr TaskSpec kRegression{TaskKind::regression, 0};

Tensor random_probs(std::size_t batch, std::size_t k, RngStream& rng) {
    Tensor p({batch, k});
    if (k == 1) {
        // Binary head: a single probability away from the clamp boundaries.
        for (std::size_t b = 0; b < batch; ++b) {
            p.at(b, 0) = 0.05 + 0.9 * rng.uniform01();
        }
        return p;
    }
    for (std::size_t b = 0; b < batch; ++b) {
        double sum = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            p.at(b, c) = 0.05 + rng.uniform01();
            sum += p.at(b, c);
        }
        for (std::size_t c = 0; c < k; ++c) p.at(b, c) /= sum;
    }
    return p;
}

}  // namespace

TEST_CASE("cross-entropy at the uniform binary prediction is ln 2") {
    std::vector<double> labels = {0.0};
    Tensor yhat({1, 1}, {0.5});
    double value = 0.0;
    loss_eval(LossKind::cross_entropy, labels, yhat, kBinary, {}, {&value, 1}, nullptr);
    CHECK(value == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("focal with gamma 0 reduces to cross-entropy") {
    RngStream rng(17);
    LossHyper hyper;
    hyper.focal_gamma = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t batch = 8;
        Tensor yhat = random_probs(batch, 5, rng);
        std::vector<double> labels(batch);
        for (auto& y : labels) y = static_cast<double>(rng.uniform_below(5));
        std::vector<double> ce(batch), fo(batch);
        loss_eval(LossKind::cross_entropy, labels, yhat, kFiveClass, hyper, ce, nullptr);
        loss_eval(LossKind::focal, labels, yhat, kFiveClass, hyper, fo, nullptr);
        for (std::size_t b = 0; b < batch; ++b) {
            CHECK(std::abs(ce[b] - fo[b]) < 1e-12);
        }
    }
}

TEST_CASE("regression point values and gradients") {
    std::vector<double> labels = {3.0};
    Tensor yhat({1, 1}, {1.0});
    double value = 0.0;
    Tensor grad({1, 1});

    loss_eval(LossKind::mse, labels, yhat, kRegression, {}, {&value, 1}, &grad);
    CHECK(value == doctest::Approx(4.0));
    CHECK(grad[0] == doctest::Approx(-4.0));

    Tensor close({1, 1}, {3.5});
    loss_eval(LossKind::huber, labels, close, kRegression, {}, {&value, 1}, &grad);
    CHECK(value == doctest::Approx(0.125));
    CHECK(grad[0] == doctest::Approx(0.5));

    Tensor far({1, 1}, {6.0});
    loss_eval(LossKind::huber, labels, far, kRegression, {}, {&value, 1}, &grad);
    CHECK(value == doctest::Approx(1.0 * (3.0 - 0.5)));
    CHECK(grad[0] == doctest::Approx(1.0));

    loss_eval(LossKind::mae, labels, far, kRegression, {}, {&value, 1}, &grad);
    CHECK(value == doctest::Approx(3.0));
    CHECK(grad[0] == doctest::Approx(1.0));
}

TEST_CASE("task-incompatible kinds are rejected") {
    std::vector<double> labels = {1.0};
    Tensor yhat({1, 1}, {0.5});
    double value = 0.0;
    CHECK_THROWS_AS(
        loss_eval(LossKind::mse, labels, yhat, kBinary, {}, {&value, 1}, nullptr),
        ConfigError);
    CHECK_THROWS_AS(
        loss_eval(LossKind::cross_entropy, labels, yhat, kRegression, {}, {&value, 1}, nullptr),
        ConfigError);

    LossCatalog bad{{LossKind::cross_entropy, LossKind::mse}, {}, kBinary};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("smooth loss gradients match finite differences") {
    RngStream rng(23);
    const std::size_t batch = 6;
    for (LossKind kind : {LossKind::cross_entropy, LossKind::focal, LossKind::kl_divergence,
                          LossKind::ce_label_noise, LossKind::kl_shifted}) {
        CAPTURE(loss_kind_name(kind));
        Tensor start = random_probs(batch, 1, rng);
        Parameter yhat(start);
        std::vector<double> labels(batch);
        for (auto& y : labels) y = rng.uniform01() < 0.5 ? 0.0 : 1.0;

        Parameter* params[] = {&yhat};
        auto loss = [&](bool with_grad) {
            std::vector<double> values(batch);
            Tensor grads({batch, 1});
            loss_eval(kind, labels, yhat.value, kBinary, {}, values, &grads);
            double total = 0.0;
            for (double v : values) total += v;
            if (with_grad) {
                yhat.grad.add(grads);
            }
            return total;
        };
        GradCheckOptions opts;
        opts.step = 1e-6;
        GradCheckReport report = gradient_check(loss, params, opts);
        CHECK(report.checked > 0);
        CHECK(report.max_rel_err < 1e-6);
    }
}

TEST_CASE("multiclass gradients match finite differences") {
    RngStream rng(31);
    const std::size_t batch = 5;
    for (LossKind kind : {LossKind::cross_entropy, LossKind::focal, LossKind::ce_label_noise}) {
        CAPTURE(loss_kind_name(kind));
        Parameter yhat(random_probs(batch, 5, rng));
        std::vector<double> labels(batch);
        for (auto& y : labels) y = static_cast<double>(rng.uniform_below(5));

        Parameter* params[] = {&yhat};
        auto loss = [&](bool with_grad) {
            std::vector<double> values(batch);
            Tensor grads({batch, 5});
            loss_eval(kind, labels, yhat.value, kFiveClass, {}, values, &grads);
            double total = 0.0;
            for (double v : values) total += v;
            if (with_grad) yhat.grad.add(grads);
            return total;
        };
        GradCheckOptions opts;
        opts.step = 1e-6;
        GradCheckReport report = gradient_check(loss, params, opts);
        CHECK(report.checked > 0);
        CHECK(report.max_rel_err < 1e-5);
    }
}

TEST_CASE("hinge gradients match finite differences away from the kink") {
    RngStream rng(37);
    const std::size_t batch = 6;
    for (LossKind kind : {LossKind::categorical_hinge, LossKind::hinge_inverted}) {
        CAPTURE(loss_kind_name(kind));
        Parameter yhat(random_probs(batch, 1, rng));
        std::vector<double> labels(batch);
        for (auto& y : labels) y = rng.uniform01() < 0.5 ? 0.0 : 1.0;

        Parameter* params[] = {&yhat};
        auto loss = [&](bool with_grad) {
            std::vector<double> values(batch);
            Tensor grads({batch, 1});
            loss_eval(kind, labels, yhat.value, kBinary, {}, values, &grads);
            double total = 0.0;
            for (double v : values) total += v;
            if (with_grad) yhat.grad.add(grads);
            return total;
        };
        GradCheckReport report = gradient_check(loss, params);
        CHECK(report.checked > 0);
        CHECK(report.max_rel_err < 1e-6);
    }
}

TEST_CASE("huber and mae kinks are detected by the checker") {
    // Prediction exactly at the huber transition: the kink guard skips it.
    std::vector<double> labels = {0.0};
    Parameter yhat(Tensor({1, 1}, {1.0}));  // |e| == delta
    Parameter* params[] = {&yhat};
    auto loss = [&](bool with_grad) {
        std::vector<double> values(1);
        Tensor grads({1, 1});
        LossHyper hyper;
        loss_eval(LossKind::huber, labels, yhat.value, kRegression, hyper, values, &grads);
        if (with_grad) yhat.grad.add(grads);
        return values[0];
    };
    // Second derivative jumps at |e| = delta but the first derivative is
    // continuous there, so central differences still agree with the analytic
    // gradient.
    GradCheckReport report = gradient_check(loss, params);
    CHECK(report.max_rel_err < 1e-5);
}

TEST_CASE("candidate matrix composes per-kind columns in catalog order") {
    RngStream rng(41);
    const std::size_t batch = 7;
    LossCatalog catalog{{LossKind::focal, LossKind::kl_divergence, LossKind::categorical_hinge,
                         LossKind::cross_entropy},
                        {},
                        kBinary};
    Tensor yhat = random_probs(batch, 1, rng);
    std::vector<double> labels(batch);
    for (auto& y : labels) y = rng.uniform01() < 0.5 ? 0.0 : 1.0;

    CandidateLossMatrix matrix = candidate_matrix(labels, yhat, catalog);
    CHECK(matrix.losses.shape() == std::vector<std::size_t>{batch, 4});
    CHECK(matrix.grads.shape() == std::vector<std::size_t>{batch, 4, 1});

    std::vector<double> column(batch);
    Tensor col_grads({batch, 1});
    for (std::size_t j = 0; j < 4; ++j) {
        loss_eval(catalog.kinds[j], labels, yhat, kBinary, {}, column, &col_grads);
        for (std::size_t b = 0; b < batch; ++b) {
            CHECK(matrix.losses.at(b, j) == column[b]);
            CHECK(matrix.grads[(b * 4 + j)] == col_grads[b]);
        }
    }
}

TEST_CASE("ce and kl coincide for one-hot labels; all losses nonnegative") {
    RngStream rng(43);
    const std::size_t batch = 16;
    Tensor yhat = random_probs(batch, 5, rng);
    std::vector<double> labels(batch);
    for (auto& y : labels) y = static_cast<double>(rng.uniform_below(5));

    std::vector<double> ce(batch), kl(batch);
    loss_eval(LossKind::cross_entropy, labels, yhat, kFiveClass, {}, ce, nullptr);
    loss_eval(LossKind::kl_divergence, labels, yhat, kFiveClass, {}, kl, nullptr);
    for (std::size_t b = 0; b < batch; ++b) {
        CHECK(ce[b] == kl[b]);  // label entropy is exactly zero
        CHECK(ce[b] >= 0.0);
    }
}

TEST_CASE("perfect one-hot prediction zeroes ce and kl columns") {
    Tensor yhat({1, 5});
    yhat.at(0, 3) = 1.0;
    std::vector<double> labels = {3.0};
    std::vector<double> value(1);
    loss_eval(LossKind::cross_entropy, labels, yhat, kFiveClass, {}, value, nullptr);
    CHECK(value[0] == doctest::Approx(0.0).epsilon(1e-6));
    loss_eval(LossKind::kl_divergence, labels, yhat, kFiveClass, {}, value, nullptr);
    CHECK(value[0] == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("clamping keeps log losses finite at the extremes") {
    std::vector<double> labels = {1.0, 0.0};
    Tensor yhat({2, 1}, {0.0, 1.0});  // worst-case predictions
    std::vector<double> values(2);
    Tensor grads({2, 1});
    for (LossKind kind : {LossKind::cross_entropy, LossKind::focal, LossKind::kl_divergence,
                          LossKind::ce_label_noise}) {
        loss_eval(kind, labels, yhat, kBinary, {}, values, &grads);
        CHECK(std::isfinite(values[0]));
        CHECK(std::isfinite(values[1]));
        CHECK(grads.all_finite());
    }
}

TEST_CASE("weighted loss selects, averages and scales linearly") {
    Tensor losses({2, 3}, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0});

    Tensor onehot({2, 3}, {0.0, 1.0, 0.0, 0.0, 0.0, 1.0});
    CHECK(weighted_loss(onehot, losses) == doctest::Approx(0.5 * (2.0 + 6.0)));

    Tensor uniform = Tensor::full({2, 3}, 1.0 / 3.0);
    CHECK(weighted_loss(uniform, losses) == doctest::Approx(0.5 * (2.0 + 5.0)));

    Tensor doubled = losses;
    doubled.scale(2.0);
    CHECK(weighted_loss(uniform, doubled) ==
          doctest::Approx(2.0 * weighted_loss(uniform, losses)));

    Tensor wrong({3, 2});
    CHECK_THROWS_AS(weighted_loss(uniform, wrong), DimError);
}

TEST_CASE("uniform weights over four candidates is the AL-1 fusion") {
    RngStream rng(47);
    const std::size_t batch = 9;
    LossCatalog catalog{{LossKind::focal, LossKind::kl_divergence, LossKind::categorical_hinge,
                         LossKind::cross_entropy},
                        {},
                        kBinary};
    Tensor yhat = random_probs(batch, 1, rng);
    std::vector<double> labels(batch);
    for (auto& y : labels) y = rng.uniform01() < 0.5 ? 0.0 : 1.0;
    CandidateLossMatrix matrix = candidate_matrix(labels, yhat, catalog);

    Tensor uniform = Tensor::full({batch, 4}, 0.25);
    double manual = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t j = 0; j < 4; ++j) {
            manual += 0.25 * matrix.losses.at(b, j);
        }
    }
    manual /= batch;
    CHECK(weighted_loss(uniform, matrix.losses) == doctest::Approx(manual).epsilon(1e-12));
}

TEST_SUITE_END();
