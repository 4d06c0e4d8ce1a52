#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mska/core/ops.hpp"
#include "mska/errors.hpp"
#include "mska/loss/ctc.hpp"
#include "mska/loss/slr.hpp"
#include "support.hpp"

using namespace mska;
using core::Value;
using data::GlossId;

namespace {

// -log of the summed probability of every frame path that collapses to the
// target, by enumerating all classes^frames paths.
double brute_force_ctc(const std::vector<double>& probs, std::size_t T, std::size_t C,
                       const std::vector<GlossId>& target, GlossId blank) {
    std::vector<std::size_t> path(T, 0);
    double total = 0.0;
    while (true) {
        std::vector<GlossId> collapsed;
        GlossId prev = blank;
        double p = 1.0;
        for (std::size_t t = 0; t < T; ++t) {
            const auto c = static_cast<GlossId>(path[t]);
            p *= probs[t * C + c];
            if (c != blank && c != prev) collapsed.push_back(c);
            prev = c;
        }
        if (collapsed == target) total += p;
        std::size_t k = 0;
        while (k < T && ++path[k] == C) path[k++] = 0;
        if (k == T) break;
    }
    return -std::log(total);
}

std::vector<double> random_distributions(std::size_t rows, std::size_t C, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    std::vector<double> p(rows * C);
    for (std::size_t r = 0; r < rows; ++r) {
        double z = 0.0;
        for (std::size_t c = 0; c < C; ++c) z += (p[r * C + c] = u(rng));
        for (std::size_t c = 0; c < C; ++c) p[r * C + c] /= z;
    }
    return p;
}

Value log_of(const core::Shape& shape, const std::vector<double>& probs) {
    std::vector<double> l(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) l[i] = std::log(probs[i]);
    return Value::constant(shape, std::move(l));
}

double kl(const std::vector<double>& p, const std::vector<double>& q) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * std::log(p[i] / q[i]);
    return s;
}

}  // namespace

TEST_CASE("ctc worked cases") {
    SUBCASE("single frame") {
        const std::vector<double> lp{std::log(0.9), std::log(0.1)};
        CHECK(loss::ctc_forward_backward(lp, 1, 2, std::vector<GlossId>{0}, 1).loss ==
              doctest::Approx(-std::log(0.9)).epsilon(1e-14));
    }
    SUBCASE("two frames, three alignments") {
        const std::vector<double> lp{std::log(0.6), std::log(0.4), std::log(0.5), std::log(0.5)};
        const double expected = -std::log(0.6 * 0.5 + 0.6 * 0.5 + 0.4 * 0.5);
        CHECK(std::abs(expected + std::log(0.8)) < 1e-15);
        CHECK(loss::ctc_forward_backward(lp, 2, 2, std::vector<GlossId>{0}, 1).loss ==
              doctest::Approx(expected).epsilon(1e-14));
    }
    SUBCASE("repeat needs a separating blank") {
        const std::vector<double> lp(4, std::log(0.5));
        CHECK(loss::ctc_min_frames(std::vector<GlossId>{0, 0}) == 3);
        CHECK_THROWS_AS(loss::ctc_forward_backward(lp, 2, 2, std::vector<GlossId>{0, 0}, 1), InfeasibleError);
    }
}

TEST_CASE("ctc equals brute-force enumeration on random small instances") {
    std::mt19937_64 rng(21);
    double worst = 0.0;
    int checked = 0;
    while (checked < 200) {
        const std::size_t V = 1 + rng() % 3;
        const std::size_t C = V + 1;
        const std::size_t T = 1 + rng() % 6;
        const std::size_t L = 1 + rng() % 3;
        std::vector<GlossId> target(L);
        for (auto& g : target) g = static_cast<GlossId>(rng() % V);
        if (loss::ctc_min_frames(target) > T) continue;
        const auto probs = random_distributions(T, C, rng);
        std::vector<double> lp(probs.size());
        for (std::size_t i = 0; i < lp.size(); ++i) lp[i] = std::log(probs[i]);
        const auto blank = static_cast<GlossId>(V);
        const double got = loss::ctc_forward_backward(lp, T, C, target, blank).loss;
        worst = std::max(worst, std::abs(got - brute_force_ctc(probs, T, C, target, blank)));
        ++checked;
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("ctc gradient matches finite differences through log-softmax") {
    std::mt19937_64 rng(22);
    const auto logits = testing::random_param({2, 5, 4}, rng, -2.0, 2.0);
    const std::vector<std::vector<GlossId>> targets{{0, 2}, {1, 1}};
    const std::vector<std::size_t> lengths{5, 4};
    auto f = [&] { return core::sum(loss::ctc_loss_batch(core::log_softmax(logits, -1), lengths, targets, 3)); };
    CHECK(testing::gradient_check(f, {logits}) < 1e-4);

    const auto single = testing::random_param({4, 3}, rng, -2.0, 2.0);
    auto g = [&] { return loss::ctc_loss(core::log_softmax(single, -1), {0, 1}, 2); };
    CHECK(testing::gradient_check(g, {single}) < 1e-4);
}

TEST_CASE("ctc frames past a sample's length do not matter") {
    std::mt19937_64 rng(23);
    auto a = random_distributions(6, 3, rng);
    auto b = a;
    for (std::size_t i = 4 * 3; i < b.size(); ++i) b[i] = 1.0 / 3.0;
    const auto la = loss::ctc_loss_batch(log_of({1, 6, 3}, a), {4}, {{0, 1}}, 2).item();
    const auto lb = loss::ctc_loss_batch(log_of({1, 6, 3}, b), {4}, {{0, 1}}, 2).item();
    CHECK(la == lb);
}

TEST_CASE("distillation worked example") {
    const std::vector<double> h0{0.8, 0.2}, h1{0.4, 0.6};
    const std::vector<Value> heads{log_of({1, 2}, h0), log_of({1, 2}, h1), log_of({1, 2}, h1), log_of({1, 2}, h1)};
    const auto result = loss::distillation_loss(heads);
    const std::vector<double> teacher{0.5, 0.5};
    const double independent = kl(teacher, h0) + 3.0 * kl(teacher, h1);
    CHECK(independent == doctest::Approx(0.2843).epsilon(1e-4 / 0.2843));
    CHECK(std::abs(result.loss.item() - independent) < 1e-12);
    CHECK(std::exp(result.teacher_log[0]) == doctest::Approx(0.5));
}

TEST_CASE("distillation is zero exactly when the heads coincide") {
    std::mt19937_64 rng(24);
    for (int trial = 0; trial < 50; ++trial) {
        const auto p = random_distributions(6, 4, rng);
        const std::vector<Value> same(4, log_of({2, 3, 4}, p));
        CHECK(std::abs(loss::distillation_loss(same).loss.item()) < 1e-12);

        std::vector<Value> heads;
        for (int k = 0; k < 4; ++k) heads.push_back(log_of({2, 3, 4}, random_distributions(6, 4, rng)));
        const double d = loss::distillation_loss(heads).loss.item();
        CHECK(d > 1e-12);
        std::vector<Value> permuted{heads[2], heads[0], heads[3], heads[1]};
        CHECK(loss::distillation_loss(permuted).loss.item() == doctest::Approx(d).epsilon(1e-12));

        // One head differing in a single row still gives a positive loss.
        auto q = p;
        q[0] += 0.01;
        q[1] -= 0.01;
        std::vector<Value> almost{same[0], same[1], same[2], log_of({2, 3, 4}, q)};
        CHECK(loss::distillation_loss(almost).loss.item() > 1e-12);
    }
}

TEST_CASE("distillation teacher carries no gradient") {
    std::mt19937_64 rng(25);
    std::vector<Value> logits;
    for (int k = 0; k < 4; ++k) logits.push_back(testing::random_param({3, 3}, rng));
    // With a frozen teacher the loss per head is cross-entropy minus a
    // constant, so d/dlogits = softmax(head) - teacher.
    std::vector<Value> heads;
    for (auto& l : logits) heads.push_back(core::log_softmax(l, -1));
    const auto result = loss::distillation_loss(heads);
    core::backward(result.loss);
    for (std::size_t k = 0; k < 4; ++k) {
        for (std::size_t r = 0; r < 3; ++r)
            for (std::size_t c = 0; c < 3; ++c) {
                const double expected =
                    (std::exp(heads[k].data()[r * 3 + c]) - std::exp(result.teacher_log[r * 3 + c])) / 3.0;
                CHECK(logits[k].grad()[r * 3 + c] == doctest::Approx(expected).epsilon(1e-12));
            }
    }
}

TEST_CASE("distillation respects valid lengths and rejects non-distributions") {
    std::mt19937_64 rng(26);
    auto a = random_distributions(4, 3, rng);
    auto b = random_distributions(4, 3, rng);
    auto b2 = b;
    for (std::size_t i = 9; i < 12; ++i) b2[i] = a[i];
    const std::vector<Value> h{log_of({1, 4, 3}, a), log_of({1, 4, 3}, b)};
    const std::vector<Value> h2{log_of({1, 4, 3}, a), log_of({1, 4, 3}, b2)};
    CHECK(loss::distillation_loss(h, {3}).loss.item() == loss::distillation_loss(h2, {3}).loss.item());

    const std::vector<Value> bad{Value::constant({1, 2}, {0.0, 0.0}), Value::constant({1, 2}, {0.0, 0.0})};
    CHECK_THROWS_AS(loss::distillation_loss(bad), ContractError);
}

TEST_CASE("loss report re-sums exactly") {
    loss::LossReport r;
    r.ctc_left = 1.1;
    r.ctc_right = 2.2;
    r.ctc_body = 3.3;
    r.ctc_fuse = 4.4;
    r.distill = 0.7;
    r.lambda = 0.5;
    CHECK(r.resum() == ((((1.1 + 2.2) + 3.3) + 4.4) + 0.5 * 0.7));
    r.lambda = 0.0;
    CHECK(r.resum() == r.ctc_sum());
    const auto fields = r.to_log_fields();
    CHECK(fields.find("ctc_left=") != std::string::npos);
    CHECK(fields.find("lambda=0") != std::string::npos);
}
