#include <doctest.h>

#include <cmath>

#include "autoloss/error.hpp"
#include "autoloss/grad_check.hpp"
#include "autoloss/mlp.hpp"
#include "autoloss/ops.hpp"
#include "autoloss/rng.hpp"
#include "autoloss/tensor.hpp"

using namespace autoloss;

TEST_SUITE_BEGIN("kernel");

TEST_CASE("tensor shape bookkeeping") {
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK(t.shape_str() == "[2x3]");
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), DimError);

    Tensor a({2}, {1.0, 2.0});
    Tensor b({2}, {3.0, 4.0});
    a.add(b);
    CHECK(a[0] == 4.0);
    CHECK(a[1] == 6.0);
    Tensor c({3});
    CHECK_THROWS_AS(a.add(c), DimError);
}

TEST_CASE("affine forward on the 1x1 example") {
    Parameter w(Tensor({1, 1}, {3.0}));
    Parameter b(Tensor({1}, {1.0}));
    AffineCache cache;
    Tensor y = affine_forward(Tensor({1, 1}, {2.0}), w, b, cache);
    CHECK(y[0] == doctest::Approx(7.0));
}

TEST_CASE("affine with identity weights is the identity") {
    Parameter w(Tensor({3, 3}));
    for (std::size_t i = 0; i < 3; ++i) w.value.at(i, i) = 1.0;
    Parameter b(Tensor({3}));
    Tensor x({2, 3}, {1.0, -2.0, 3.0, 0.5, 0.25, -0.125});
    AffineCache cache;
    Tensor y = affine_forward(x, w, b, cache);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(y[i] == doctest::Approx(x[i]));
    }
}

TEST_CASE("affine rejects mismatched shapes with both shapes in the message") {
    Parameter w(Tensor({3, 2}));
    Parameter b(Tensor({2}));
    Tensor x({2, 4});
    try {
        AffineCache cache;
        affine_forward(x, w, b, cache);
        FAIL("expected DimError");
    } catch (const DimError& e) {
        std::string msg = e.what();
        CHECK(msg.find("[2x4]") != std::string::npos);
        CHECK(msg.find("[3x2]") != std::string::npos);
    }
}

TEST_CASE("activation point values") {
    ReluCache rc;
    Tensor r = relu_forward(Tensor({1, 2}, {-1.0, 2.0}), rc);
    CHECK(r[0] == 0.0);
    CHECK(r[1] == 2.0);

    SigmoidCache sc;
    Tensor s = sigmoid_forward(Tensor({1, 1}, {0.0}), sc);
    CHECK(s[0] == doctest::Approx(0.5));

    SoftmaxCache smc;
    Tensor sm = softmax_forward(Tensor({1, 2}, {0.0, 0.0}), smc);
    CHECK(sm[0] == doctest::Approx(0.5));
    CHECK(sm[1] == doctest::Approx(0.5));
}

TEST_CASE("softmax rows sum to one") {
    RngStream rng(11);
    Tensor x({5, 7});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-30.0, 30.0);
    SoftmaxCache cache;
    Tensor y = softmax_forward(x, cache);
    for (std::size_t r = 0; r < 5; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < 7; ++c) sum += y.at(r, c);
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("dropout identity cases") {
    Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
    RngStream rng(5);

    DropoutCache c1;
    Tensor y1 = dropout_forward(x, 0.0, /*train=*/true, &rng, c1);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y1[i] == x[i]);

    DropoutCache c2;
    Tensor y2 = dropout_forward(x, 0.9, /*train=*/false, nullptr, c2);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y2[i] == x[i]);

    DropoutCache c3;
    CHECK_THROWS_AS(dropout_forward(x, 1.0, true, &rng, c3), ConfigError);
    CHECK_THROWS_AS(dropout_forward(x, -0.1, true, &rng, c3), ConfigError);
}

TEST_CASE("inverted dropout preserves expectation within 1 percent") {
    const double rate = 0.2;
    const std::size_t trials = 100000;
    RngStream rng(123);
    Tensor x({1, 8});
    x.fill(1.0);
    double sum = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        DropoutCache cache;
        Tensor y = dropout_forward(x, rate, true, &rng, cache);
        for (std::size_t i = 0; i < y.size(); ++i) sum += y[i];
    }
    const double mean = sum / static_cast<double>(trials * 8);
    CHECK(std::abs(mean - 1.0) < 0.01);
}

TEST_CASE("batchnorm train fixed point on standardized input") {
    // Zero-mean, unit-variance columns with scale 1 / shift 0 stay in place
    // up to the epsilon in the denominator.
    const std::size_t batch = 64;
    BatchNorm bn(3);
    RngStream rng(7);
    Tensor x({batch, 3});
    for (std::size_t c = 0; c < 3; ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < batch; ++r) {
            x.at(r, c) = rng.gaussian();
            mean += x.at(r, c);
        }
        mean /= batch;
        double var = 0.0;
        for (std::size_t r = 0; r < batch; ++r) {
            x.at(r, c) -= mean;
            var += x.at(r, c) * x.at(r, c);
        }
        var /= batch;
        for (std::size_t r = 0; r < batch; ++r) x.at(r, c) /= std::sqrt(var);
    }
    BatchNormCache cache;
    Tensor y = bn.forward(x, /*train=*/true, cache);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(std::abs(y[i] - x[i]) < 1e-4);
    }
}

TEST_CASE("batchnorm rejects a train batch of one") {
    BatchNorm bn(2);
    BatchNormCache cache;
    Tensor x({1, 2}, {1.0, 2.0});
    CHECK_THROWS_AS(bn.forward(x, true, cache), DataError);
    CHECK_NOTHROW(bn.forward(x, false, cache));
}

TEST_CASE("batchnorm eval uses running statistics") {
    BatchNorm bn(1);
    RngStream rng(3);
    Tensor x({32, 1});
    for (std::size_t t = 0; t < 50; ++t) {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = 5.0 + 2.0 * rng.gaussian();
        BatchNormCache cache;
        bn.forward(x, true, cache);
    }
    CHECK(bn.running_mean()[0] == doctest::Approx(5.0).epsilon(0.1));
    CHECK(bn.running_var()[0] == doctest::Approx(4.0).epsilon(0.2));

    // Eval on a constant input equal to the running mean lands near beta.
    Tensor probe({2, 1});
    probe.fill(bn.running_mean()[0]);
    BatchNormCache cache;
    Tensor y = bn.forward(probe, false, cache);
    CHECK(std::abs(y[0]) < 1e-9);
}

TEST_CASE("forward determinism under identical rng state") {
    Tensor x({4, 6});
    RngStream init(21);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = init.gaussian();

    auto run = [&](std::uint64_t seed) {
        RngStream rng(seed);
        DropoutCache cache;
        return dropout_forward(x, 0.5, true, &rng, cache);
    };
    Tensor a = run(99);
    Tensor b = run(99);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i] == b[i]);
    }
}

TEST_CASE("per-op gradients match finite differences over 20 seeds") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        RngStream rng(seed);
        const std::size_t batch = 4, in = 3, out = 2;
        Parameter w(Tensor({in, out}));
        Parameter b(Tensor({out}));
        init_gaussian(w.value, 1.0, rng);
        init_gaussian(b.value, 1.0, rng);
        Tensor x({batch, in});
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.gaussian();

        // Composite: affine -> sigmoid -> squared sum; exercises both kernels.
        Parameter* params[] = {&w, &b};
        auto loss = [&](bool with_grad) {
            AffineCache ac;
            SigmoidCache sc;
            Tensor h = affine_forward(x, w, b, ac);
            Tensor y = sigmoid_forward(h, sc);
            double l = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) l += y[i] * y[i];
            if (with_grad) {
                Tensor dy(y.shape());
                for (std::size_t i = 0; i < y.size(); ++i) dy[i] = 2.0 * y[i];
                Tensor dh = sigmoid_backward(dy, sc);
                affine_backward(dh, ac, w, b);
            }
            return l;
        };
        GradCheckReport report = gradient_check(loss, params);
        CHECK(report.checked > 0);
        CHECK(report.max_rel_err < 1e-4);
    }
}

TEST_CASE("batchnorm train-mode gradients match finite differences") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        RngStream rng(seed * 31);
        const std::size_t batch = 6, f = 3;
        BatchNorm bn(f);
        init_gaussian(bn.gamma().value, 1.0, rng);
        bn.gamma().value.add(Tensor::full({f}, 1.0));
        init_gaussian(bn.beta().value, 0.5, rng);
        Tensor x({batch, f});
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.gaussian() * 2.0;

        // Separate instance per evaluation keeps running stats out of the
        // loss path; gradients only need gamma/beta plus the batch statistics.
        Parameter* params[] = {&bn.gamma(), &bn.beta()};
        auto loss = [&](bool with_grad) {
            BatchNorm probe(f);
            probe.gamma().value = bn.gamma().value;
            probe.beta().value = bn.beta().value;
            BatchNormCache cache;
            Tensor y = probe.forward(x, true, cache);
            double l = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) l += std::sin(y[i]);
            if (with_grad) {
                Tensor dy(y.shape());
                for (std::size_t i = 0; i < y.size(); ++i) dy[i] = std::cos(y[i]);
                probe.backward(dy, cache);
                bn.gamma().grad.add(probe.gamma().grad);
                bn.beta().grad.add(probe.beta().grad);
            }
            return l;
        };
        GradCheckReport report = gradient_check(loss, params);
        CHECK(report.checked > 0);
        CHECK(report.max_rel_err < 1e-4);
    }
}

TEST_CASE("batchnorm input gradients in train mode match finite differences") {
    RngStream rng(77);
    const std::size_t batch = 5, f = 2;
    Tensor x({batch, f});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.gaussian();
    Parameter x_param(x);

    Parameter* params[] = {&x_param};
    auto loss = [&](bool with_grad) {
        BatchNorm probe(f);
        BatchNormCache cache;
        Tensor y = probe.forward(x_param.value, true, cache);
        double l = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) l += y[i] * y[i] * y[i] / 3.0;
        if (with_grad) {
            Tensor dy(y.shape());
            for (std::size_t i = 0; i < y.size(); ++i) dy[i] = y[i] * y[i];
            Tensor dx = probe.backward(dy, cache);
            x_param.grad.add(dx);
        }
        return l;
    };
    GradCheckReport report = gradient_check(loss, params);
    CHECK(report.checked > 0);
    CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("mlp tower forward/backward matches finite differences in eval mode") {
    RngStream rng(5);
    MlpTower tower(4, 8, 2, 0.2, rng);
    Tensor x({3, 4});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.gaussian();

    std::vector<NamedParam> named;
    tower.collect_params("mlp", named);
    std::vector<Parameter*> params;
    for (auto& p : named) params.push_back(p.param);

    auto loss = [&](bool with_grad) {
        MlpCache cache;
        Tensor y = tower.forward(x, /*train=*/false, nullptr, cache);
        double l = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) l += y[i] * y[i];
        if (with_grad) {
            Tensor dy(y.shape());
            for (std::size_t i = 0; i < y.size(); ++i) dy[i] = 2.0 * y[i];
            tower.backward(dy, cache);
        }
        return l;
    };
    GradCheckReport report = gradient_check(loss, params);
    CHECK(report.checked > 0);
    CHECK(report.max_rel_err < 1e-4);
}

TEST_SUITE_END();
