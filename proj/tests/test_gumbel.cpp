#include <doctest.h>

#include <cmath>
#include <limits>

#include "autoloss/error.hpp"
#include "autoloss/grad_check.hpp"
#include "autoloss/gumbel.hpp"
#include "autoloss/rng.hpp"

using namespace autoloss;

TEST_SUITE_BEGIN("gumbel");

TEST_CASE("gumbel transform of u = 1/e is zero") {
    // g = -log(-log(u)); u = e^-1 gives -log(1) = 0.
    const double u = std::exp(-1.0);
    CHECK(-std::log(-std::log(u)) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("noise is seed-deterministic") {
    RngStream a(55), b(55);
    Tensor ga = sample_gumbel(4, 3, a);
    Tensor gb = sample_gumbel(4, 3, b);
    for (std::size_t i = 0; i < ga.size(); ++i) {
        CHECK(ga[i] == gb[i]);
    }
}

TEST_CASE("sample mean approaches the Euler-Mascheroni constant") {
    RngStream rng(2024);
    const std::size_t n = 1000000;
    Tensor g = sample_gumbel(1000, 1000, rng);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += g[i];
    mean /= static_cast<double>(n);
    CHECK(std::abs(mean - 0.5772156649) < 0.005);
}

TEST_CASE("zero noise at tau 1 reproduces alpha") {
    Tensor alpha({2, 3}, {0.2, 0.3, 0.5, 0.6, 0.3, 0.1});
    Tensor zero({2, 3});
    Tensor p = gumbel_softmax(alpha, zero, 1.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(p[i] == doctest::Approx(alpha[i]).epsilon(1e-12));
    }
}

TEST_CASE("uniform alpha stays uniform for any temperature") {
    Tensor alpha = Tensor::full({1, 4}, 0.25);
    Tensor zero({1, 4});
    for (double tau : {2.0, 1.0, 0.5, 0.05}) {
        Tensor p = gumbel_softmax(alpha, zero, tau);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(p[i] == doctest::Approx(0.25).epsilon(1e-12));
        }
    }
}

TEST_CASE("low temperature output is near one-hot") {
    RngStream rng(7);
    Tensor alpha({1, 4}, {0.4, 0.3, 0.2, 0.1});
    Tensor noise = sample_gumbel(1, 4, rng);
    Tensor p = gumbel_softmax(alpha, noise, 0.01);
    double mx = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        mx = std::max(mx, p[i]);
        sum += p[i];
    }
    CHECK(mx > 0.99);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("non-positive temperature is a schedule error") {
    Tensor alpha = Tensor::full({1, 2}, 0.5);
    Tensor zero({1, 2});
    CHECK_THROWS_AS(gumbel_softmax(alpha, zero, 0.0), ConfigError);
    CHECK_THROWS_AS(gumbel_softmax(alpha, zero, -1.0), ConfigError);
}

TEST_CASE("hard selection basics and tie breaking") {
    Tensor alpha({1, 2}, {0.9, 0.1});
    Tensor zero({1, 2});
    CHECK(hard_select(alpha, zero) == std::vector<std::size_t>{0});

    Tensor tie = Tensor::full({1, 3}, 1.0 / 3.0);
    CHECK(hard_select(tie, Tensor({1, 3})) == std::vector<std::size_t>{0});
}

TEST_CASE("gumbel-max selection frequency matches alpha") {
    RngStream rng(31337);
    Tensor alpha({1, 2}, {0.7, 0.3});
    const std::size_t trials = 100000;
    std::size_t chose0 = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        Tensor noise = sample_gumbel(1, 2, rng);
        chose0 += hard_select(alpha, noise)[0] == 0;
    }
    const double freq = static_cast<double>(chose0) / trials;
    CHECK(std::abs(freq - 0.7) < 0.01);
}

TEST_CASE("argmax of the soft output equals the hard selection at any tau") {
    RngStream rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor alpha({1, 5});
        double sum = 0.0;
        for (std::size_t i = 0; i < 5; ++i) {
            alpha[i] = 0.01 + rng.uniform01();
            sum += alpha[i];
        }
        for (std::size_t i = 0; i < 5; ++i) alpha[i] /= sum;
        Tensor noise = sample_gumbel(1, 5, rng);
        const std::size_t hard = hard_select(alpha, noise)[0];
        for (double tau : {1.0, 0.5, 0.1, 0.01}) {
            Tensor p = gumbel_softmax(alpha, noise, tau);
            std::size_t soft = 0;
            for (std::size_t i = 1; i < 5; ++i) {
                if (p[i] > p[soft]) soft = i;
            }
            CHECK(soft == hard);
        }
    }
}

TEST_CASE("gradient w.r.t. alpha matches finite differences for tau >= 0.1") {
    RngStream rng(71);
    for (double tau : {1.0, 0.5, 0.1}) {
        CAPTURE(tau);
        // Keep (log alpha + g) / tau in the responsive regime: fully
        // saturated rows have gradients at the e^-20 scale, which central
        // differences cannot resolve. Alpha spreads and noise scale with tau.
        Parameter alpha(Tensor({3, 4}));
        for (std::size_t b = 0; b < 3; ++b) {
            double sum = 0.0;
            for (std::size_t i = 0; i < 4; ++i) {
                alpha.value.at(b, i) = std::exp(tau * rng.uniform(-1.0, 1.0));
                sum += alpha.value.at(b, i);
            }
            for (std::size_t i = 0; i < 4; ++i) alpha.value.at(b, i) /= sum;
        }
        Tensor noise = sample_gumbel(3, 4, rng);
        noise.scale(tau);
        Tensor weights({3, 4});
        for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = rng.gaussian();

        Parameter* params[] = {&alpha};
        auto loss = [&](bool with_grad) {
            GumbelSoftmaxCache cache;
            Tensor p = gumbel_softmax(alpha.value, noise, tau, &cache);
            double l = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) l += weights[i] * p[i];
            if (with_grad) {
                alpha.grad.add(gumbel_softmax_backward(weights, cache));
            }
            return l;
        };
        GradCheckOptions opts;
        // At tau = 0.1 suppressed candidates carry gradients around 1e-10;
        // those sit below what central differences can resolve.
        opts.abs_floor = 1e-6;
        GradCheckReport report = gradient_check(loss, params, opts);
        CHECK(report.checked > 0);
        CHECK(report.max_rel_err < 1e-5);
    }
}

TEST_CASE("entropy of p is non-increasing in expectation as tau falls") {
    RngStream rng(13);
    Tensor alpha({1, 4}, {0.4, 0.25, 0.2, 0.15});
    const double taus[] = {1.0, 0.5, 0.1, 0.01};
    double prev = std::numeric_limits<double>::infinity();
    for (double tau : taus) {
        RngStream noise_rng(777);  // shared noise draws across temperatures
        double entropy = 0.0;
        const int draws = 1000;
        for (int t = 0; t < draws; ++t) {
            Tensor noise = sample_gumbel(1, 4, noise_rng);
            Tensor p = gumbel_softmax(alpha, noise, tau);
            for (std::size_t i = 0; i < 4; ++i) {
                if (p[i] > 0.0) entropy -= p[i] * std::log(p[i]);
            }
        }
        entropy /= draws;
        CHECK(entropy <= prev + 1e-9);
        prev = entropy;
    }
}

TEST_CASE("temperature schedule hits the documented points") {
    CHECK(temperature(0) == doctest::Approx(1.0));
    CHECK(temperature(1) == doctest::Approx(1.0 - 0.00005));
    CHECK(temperature(19800) == doctest::Approx(0.01));
    CHECK(temperature(1000000) == doctest::Approx(0.01));
    // Non-increasing on a grid.
    double prev = temperature(0);
    for (std::uint64_t t = 1; t < 30000; t += 500) {
        const double cur = temperature(t);
        CHECK(cur <= prev);
        prev = cur;
    }
}

TEST_SUITE_END();
