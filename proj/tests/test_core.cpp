#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "mska/core/ops.hpp"
#include "mska/core/optim.hpp"
#include "mska/errors.hpp"
#include "support.hpp"

using namespace mska;
using core::Value;
using testing::gradient_check;
using testing::probe;
using testing::random_const;
using testing::random_param;

namespace {

constexpr double kGradTol = 1e-4;

// Direct-loop temporal convolution used as an oracle.
std::vector<double> conv_oracle(const Value& x, const Value& w, const Value& b, std::size_t stride) {
    const std::size_t B = x.dim(0), T = x.dim(1), N = x.dim(2), Ci = x.dim(3), Co = w.dim(2);
    const std::size_t To = (T - 1) / stride + 1;
    std::vector<double> out(B * To * N * Co, 0.0);
    for (std::size_t bb = 0; bb < B; ++bb)
        for (std::size_t t = 0; t < To; ++t)
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t o = 0; o < Co; ++o) {
                    double acc = b.data()[o];
                    for (std::size_t k = 0; k < 3; ++k) {
                        const long src = static_cast<long>(t * stride + k) - 1;
                        if (src < 0 || src >= static_cast<long>(T)) continue;
                        for (std::size_t i = 0; i < Ci; ++i) {
                            acc += x.at({bb, static_cast<std::size_t>(src), n, i}) * w.at({k, i, o});
                        }
                    }
                    out[((bb * To + t) * N + n) * Co + o] = acc;
                }
    return out;
}

}  // namespace

TEST_CASE("add broadcasts a trailing-suffix operand from either side") {
    const auto a = Value::constant({2, 3}, {1, 2, 3, 4, 5, 6});
    const auto b = Value::constant({3}, {10, 20, 30});
    const auto s = core::add(a, b);
    const auto r = core::sub(b, a);
    CHECK(s.shape() == core::Shape{2, 3});
    CHECK(s.at({1, 2}) == 36.0);
    CHECK(r.at({0, 0}) == 9.0);
    CHECK(r.at({1, 1}) == 15.0);
    CHECK_THROWS_AS(core::add(a, Value::constant({2}, {1, 2})), DimensionError);
}

TEST_CASE("matmul agrees with a hand product and broadcasts a plain matrix") {
    const auto a = Value::constant({2, 2, 2}, {1, 2, 3, 4, 0, 1, 1, 0});
    const auto b = Value::constant({2, 1}, {5, 6});
    const auto c = core::matmul(a, b);
    CHECK(c.shape() == core::Shape{2, 2, 1});
    CHECK(c.at({0, 0, 0}) == 17.0);
    CHECK(c.at({0, 1, 0}) == 39.0);
    CHECK(c.at({1, 0, 0}) == 6.0);
    CHECK(c.at({1, 1, 0}) == 5.0);
    CHECK_THROWS_AS(core::matmul(a, Value::constant({3, 1}, {1, 2, 3})), DimensionError);
}

TEST_CASE("softmax rows are distributions and log_softmax is their log") {
    std::mt19937_64 rng(1);
    const auto x = random_const({4, 7}, rng, -30.0, 30.0);
    const auto p = core::softmax(x, -1);
    const auto lp = core::log_softmax(x, -1);
    for (std::size_t r = 0; r < 4; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < 7; ++c) {
            s += p.at({r, c});
            CHECK(std::log(p.at({r, c})) == doctest::Approx(lp.at({r, c})).epsilon(1e-12));
        }
        CHECK(std::abs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("kl_divergence matches the direct sum and vanishes on identical rows") {
    const auto lp = core::log_softmax(Value::constant({1, 3}, {0.1, 0.5, -1.0}), -1);
    const auto lq = core::log_softmax(Value::constant({1, 3}, {1.0, -0.2, 0.3}), -1);
    double expected = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
        expected += std::exp(lp.at({0, c})) * (lp.at({0, c}) - lq.at({0, c}));
    }
    CHECK(core::kl_divergence(lp, lq).item() == doctest::Approx(expected).epsilon(1e-14));
    CHECK(core::kl_divergence(lp, lp).item() == 0.0);
}

TEST_CASE("temporal_conv matches a direct loop for both strides and odd lengths") {
    std::mt19937_64 rng(2);
    for (std::size_t stride : {1u, 2u}) {
        for (std::size_t T : {1u, 4u, 5u}) {
            const auto x = random_const({2, T, 3, 2}, rng);
            const auto w = random_const({3, 2, 4}, rng);
            const auto b = random_const({4}, rng);
            const auto y = core::temporal_conv(x, w, b, stride);
            CHECK(y.dim(1) == (T + stride - 1) / stride);
            const auto ref = conv_oracle(x, w, b, stride);
            REQUIRE(ref.size() == y.size());
            for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y.data()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("permute and reshape move data as expected") {
    const auto x = Value::constant({2, 3}, {0, 1, 2, 3, 4, 5});
    const auto t = core::permute(x, {1, 0});
    CHECK(t.shape() == core::Shape{3, 2});
    CHECK(t.at({2, 1}) == 5.0);
    CHECK(t.at({0, 1}) == 3.0);
    CHECK(core::reshape(x, {3, 2}).at({2, 0}) == 4.0);
    CHECK_THROWS_AS(core::reshape(x, {4, 2}), DimensionError);
}

TEST_CASE("batch norm normalizes with biased variance and folds running statistics") {
    const auto x = Value::constant({4, 1}, {1, 2, 3, 6});
    const auto gamma = Value::constant({1}, {2.0});
    const auto beta = Value::constant({1}, {0.5});
    core::BatchNormState state(1);
    const auto y = core::batch_norm(x, gamma, beta, state, true);
    const double mean = 3.0, var = (4.0 + 1.0 + 0.0 + 9.0) / 4.0;
    CHECK(y.at({3, 0}) == doctest::Approx(2.0 * (6.0 - mean) / std::sqrt(var + 1e-5) + 0.5).epsilon(1e-12));
    CHECK(state.running_mean[0] == doctest::Approx(0.1 * mean).epsilon(1e-14));
    CHECK(state.running_var[0] == doctest::Approx(0.9 * 1.0 + 0.1 * var).epsilon(1e-14));

    const auto e = core::batch_norm(x, gamma, beta, state, false);
    const double rm = state.running_mean[0], rv = state.running_var[0];
    CHECK(e.at({0, 0}) == doctest::Approx(2.0 * (1.0 - rm) / std::sqrt(rv + 1e-5) + 0.5).epsilon(1e-12));
}

TEST_CASE("error contracts") {
    const auto v = Value::constant({2}, {1, 2});
    CHECK_THROWS_AS(core::backward(v), ContractError);
    const auto bad = Value::constant({2}, {1.0, std::numeric_limits<double>::quiet_NaN()});
    CHECK_THROWS_AS(core::tanh(bad), NumericError);
    CHECK_THROWS_AS(core::softmax(bad, 0), NumericError);
    CHECK_THROWS_AS(Value::constant({0, 2}, {}), DimensionError);
    CHECK_THROWS_AS(core::mean(v, 3), DimensionError);
}

TEST_CASE("leaf gradients accumulate across backward calls until zero_grad") {
    auto p = Value::parameter({2}, {1.0, -2.0});
    auto loss = [&] { return core::sum(core::mul(p, p)); };
    core::backward(loss());
    core::backward(loss());
    CHECK(p.grad()[0] == 4.0);
    CHECK(p.grad()[1] == -8.0);
    p.zero_grad();
    core::backward(loss());
    CHECK(p.grad()[0] == 2.0);
}

TEST_CASE("no-grad guard records nothing") {
    auto p = Value::parameter({2}, {1.0, 2.0});
    {
        core::NoGradGuard guard;
        const auto y = core::mul(p, p);
        CHECK_FALSE(y.requires_grad());
    }
    CHECK(core::mul(p, p).requires_grad());
}

TEST_CASE("gradient checks for every primitive") {
    std::mt19937_64 rng(3);

    SUBCASE("elementwise with broadcasting") {
        auto a = random_param({2, 3, 4}, rng);
        auto b = random_param({4}, rng);
        CHECK(gradient_check([&] { return probe(core::add(a, b)); }, {a, b}) < kGradTol);
        CHECK(gradient_check([&] { return probe(core::sub(b, a)); }, {a, b}) < kGradTol);
        CHECK(gradient_check([&] { return probe(core::mul(a, b)); }, {a, b}) < kGradTol);
        CHECK(gradient_check([&] { return probe(core::scale(a, -2.5)); }, {a}) < kGradTol);
    }
    SUBCASE("activations away from kinks") {
        auto a = Value::parameter({6}, {-1.3, -0.7, -0.2, 0.3, 0.9, 1.4});
        CHECK(gradient_check([&] { return probe(core::tanh(a)); }, {a}) < kGradTol);
        CHECK(gradient_check([&] { return probe(core::relu(a)); }, {a}) < kGradTol);
        CHECK(gradient_check([&] { return probe(core::leaky_relu(a)); }, {a}) < kGradTol);
    }
    SUBCASE("matmul batched and broadcast") {
        auto a = random_param({2, 3, 4}, rng);
        auto b = random_param({2, 4, 5}, rng);
        auto w = random_param({4, 2}, rng);
        CHECK(gradient_check([&] { return probe(core::matmul(a, b)); }, {a, b}) < kGradTol);
        CHECK(gradient_check([&] { return probe(core::matmul(a, w)); }, {a, w}) < kGradTol);
    }
    SUBCASE("softmax family") {
        auto x = random_param({3, 5}, rng, -2.0, 2.0);
        auto y = random_param({3, 5}, rng, -2.0, 2.0);
        CHECK(gradient_check([&] { return probe(core::softmax(x, -1)); }, {x}) < kGradTol);
        CHECK(gradient_check([&] { return probe(core::softmax(x, 0)); }, {x}) < kGradTol);
        CHECK(gradient_check([&] { return probe(core::log_softmax(x, -1)); }, {x}) < kGradTol);
        CHECK(gradient_check(
                  [&] { return probe(core::kl_divergence(core::log_softmax(x, -1), core::log_softmax(y, -1))); },
                  {x, y}) < kGradTol);
    }
    SUBCASE("linear and temporal convolution") {
        auto x = random_param({2, 5, 3, 2}, rng);
        auto w = random_param({2, 4}, rng);
        auto b = random_param({4}, rng);
        CHECK(gradient_check([&] { return probe(core::linear(x, w, b)); }, {x, w, b}) < kGradTol);
        auto k = random_param({3, 2, 3}, rng);
        auto kb = random_param({3}, rng);
        CHECK(gradient_check([&] { return probe(core::temporal_conv(x, k, kb, 1)); }, {x, k, kb}) < kGradTol);
        CHECK(gradient_check([&] { return probe(core::temporal_conv(x, k, kb, 2)); }, {x, k, kb}) < kGradTol);
    }
    SUBCASE("reductions and layout") {
        auto x = random_param({2, 3, 4}, rng);
        auto y = random_param({2, 1, 4}, rng);
        CHECK(gradient_check([&] { return probe(core::mean(x, 1)); }, {x}) < kGradTol);
        CHECK(gradient_check([&] { return core::sum(core::mul(x, x)); }, {x}) < kGradTol);
        CHECK(gradient_check([&] { return probe(core::concat({x, y}, 1)); }, {x, y}) < kGradTol);
        CHECK(gradient_check([&] { return probe(core::permute(x, {2, 0, 1})); }, {x}) < kGradTol);
        CHECK(gradient_check([&] { return probe(core::reshape(x, {6, 4})); }, {x}) < kGradTol);
    }
    SUBCASE("batch norm in training mode") {
        auto x = random_param({3, 4, 2}, rng);
        auto g = random_param({2}, rng, 0.5, 1.5);
        auto b = random_param({2}, rng);
        core::BatchNormState state(2);
        CHECK(gradient_check([&] { return probe(core::batch_norm(x, g, b, state, true)); }, {x, g, b}) < kGradTol);
    }
}

TEST_CASE("adam matches an independent scalar update") {
    auto p = Value::parameter({1}, {1.0});
    core::AdamOptions opts;
    opts.lr = 0.1;
    opts.weight_decay = 0.01;
    core::Adam adam(opts);
    std::vector<Value> params{p};

    double value = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 5; ++t) {
        const double g = 0.5 * t - 1.0;
        p.mutable_grad()[0] = g;
        adam.step(params);

        value -= opts.lr * opts.weight_decay * value;
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mhat = m / (1.0 - std::pow(0.9, t));
        const double vhat = v / (1.0 - std::pow(0.999, t));
        value -= opts.lr * mhat / (std::sqrt(vhat) + 1e-8);
        CHECK(p.data()[0] == doctest::Approx(value).epsilon(1e-13));
    }
    CHECK(adam.steps() == 5);
}

TEST_CASE("cosine schedule endpoints and midpoint") {
    CHECK(core::cosine_lr(0, 100, 1e-3) == 1e-3);
    CHECK(core::cosine_lr(50, 100, 1e-3) == doctest::Approx(5e-4).epsilon(1e-12));
    CHECK(core::cosine_lr(100, 100, 1e-3) == doctest::Approx(0.0).epsilon(1e-18));
    CHECK(core::cosine_lr(25, 100, 1.0) == doctest::Approx((1.0 + std::cos(std::numbers::pi / 4)) / 2));
    CHECK_THROWS_AS(core::cosine_lr(1, 0, 1.0), ContractError);
    CHECK_THROWS_AS(core::cosine_lr(101, 100, 1.0), ContractError);
}

TEST_CASE("gradient clipping rescales to the global norm") {
    auto a = Value::parameter({2}, {0, 0});
    auto b = Value::parameter({1}, {0});
    a.mutable_grad()[0] = 3.0;
    a.mutable_grad()[1] = 0.0;
    b.mutable_grad()[0] = 4.0;
    std::vector<Value> params{a, b};
    CHECK(core::clip_grad_norm(params, 1.0) == doctest::Approx(5.0));
    CHECK(a.grad()[0] == doctest::Approx(0.6));
    CHECK(b.grad()[0] == doctest::Approx(0.8));
    CHECK(core::clip_grad_norm(params, 10.0) == doctest::Approx(1.0));
    CHECK(a.grad()[0] == doctest::Approx(0.6));
}
