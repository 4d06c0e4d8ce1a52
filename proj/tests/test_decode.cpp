#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "mska/decode.hpp"
#include "mska/errors.hpp"

using namespace mska;
using namespace mska::decode;

namespace {

FrameMatrix random_probs(std::size_t T, std::size_t C, std::mt19937_64& rng, double sharpness = 1.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    FrameMatrix m{T, C, std::vector<double>(T * C)};
    for (std::size_t t = 0; t < T; ++t) {
        double z = 0.0;
        for (std::size_t c = 0; c < C; ++c) z += (m.values[t * C + c] = std::exp(sharpness * u(rng)));
        for (std::size_t c = 0; c < C; ++c) m.values[t * C + c] /= z;
    }
    return m;
}

// Probability of every collapsed labeling, by enumerating all frame paths.
std::map<std::vector<GlossId>, double> labeling_probs(const FrameMatrix& p, GlossId blank) {
    std::map<std::vector<GlossId>, double> out;
    std::vector<std::size_t> path(p.frames, 0);
    while (true) {
        std::vector<GlossId> labels;
        GlossId prev = blank;
        double prob = 1.0;
        for (std::size_t t = 0; t < p.frames; ++t) {
            const auto c = static_cast<GlossId>(path[t]);
            prob *= p.at(t, c);
            if (c != blank && c != prev) labels.push_back(c);
            prev = c;
        }
        out[labels] += prob;
        std::size_t k = 0;
        while (k < p.frames && ++path[k] == p.classes) path[k++] = 0;
        if (k == p.frames) break;
    }
    return out;
}

}  // namespace

TEST_CASE("ensemble averages per frame") {
    const FrameMatrix a{1, 2, {0.8, 0.2}}, b{1, 2, {0.4, 0.6}};
    const auto m = ensemble({a, b});
    CHECK(m.at(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(m.at(0, 1) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(ensemble({a, a, a}).values == a.values);

    std::mt19937_64 rng(1);
    std::vector<FrameMatrix> many;
    for (int k = 0; k < 5; ++k) many.push_back(random_probs(7, 4, rng));
    const auto e = ensemble(many);
    for (std::size_t t = 0; t < 7; ++t) {
        double z = 0.0;
        for (std::size_t c = 0; c < 4; ++c) z += e.at(t, c);
        CHECK(std::abs(z - 1.0) < 1e-12);
    }
    CHECK_THROWS_AS(ensemble({a, FrameMatrix{2, 2, {0.5, 0.5, 0.5, 0.5}}}), DimensionError);
}

TEST_CASE("beam decode collapses repeats and blanks") {
    // Frame argmaxes a a blank a, with near-one peaks.
    const double hi = 0.98, lo = 0.01;
    const FrameMatrix p{4, 3, {hi, lo, lo, hi, lo, lo, lo, lo, hi, hi, lo, lo}};
    const auto hyps = beam_decode(log(p), 5, 2);
    REQUIRE_FALSE(hyps.empty());
    CHECK(hyps[0].glosses == std::vector<GlossId>{0, 0});
    for (const auto& h : hyps) {
        CHECK(h.score <= 0.0);
        for (auto g : h.glosses) CHECK(g != 2);
    }
}

TEST_CASE("beam decode edge cases") {
    const auto empty = beam_decode(FrameMatrix{0, 3, {}}, 5, 2);
    REQUIRE(empty.size() == 1);
    CHECK(empty[0].glosses.empty());
    CHECK(empty[0].score == 0.0);

    // Uniform frames: every one-frame labeling ties; the smaller id wins.
    const FrameMatrix uniform{1, 3, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
    const auto a = beam_decode(log(uniform), 1, 2);
    const auto b = beam_decode(log(uniform), 1, 2);
    REQUIRE(a.size() == 1);
    CHECK(a[0].glosses == b[0].glosses);
    CHECK(a[0].glosses.empty());
    const auto three = beam_decode(log(uniform), 3, 2);
    REQUIRE(three.size() == 3);
    CHECK(three[1].glosses == std::vector<GlossId>{0});
    CHECK(three[2].glosses == std::vector<GlossId>{1});

    CHECK_THROWS_AS(beam_decode(log(uniform), 0, 2), ContractError);
}

TEST_CASE("wide beam equals exhaustive search over labelings") {
    std::mt19937_64 rng(2);
    int instances = 0;
    for (std::size_t T = 1; T <= 5; ++T)
        for (std::size_t V = 1; V <= 2; ++V)
            for (int trial = 0; trial < 20; ++trial) {
                const auto p = random_probs(T, V + 1, rng, 3.0);
                const auto blank = static_cast<GlossId>(V);
                const auto all = labeling_probs(p, blank);
                std::vector<GlossId> best;
                double best_p = -1.0;
                for (const auto& [labels, prob] : all) {
                    if (prob > best_p) {  // map order makes the first maximum the smallest
                        best_p = prob;
                        best = labels;
                    }
                }
                const auto hyps = beam_decode(log(p), all.size(), blank);
                REQUIRE_FALSE(hyps.empty());
                CHECK(hyps[0].glosses == best);
                CHECK(std::abs(hyps[0].score - std::log(best_p)) < 1e-9);
                // Every returned score is the exact labeling probability.
                for (const auto& h : hyps) CHECK(std::abs(h.score - std::log(all.at(h.glosses))) < 1e-9);
                ++instances;
            }
    CHECK(instances == 200);
}

TEST_CASE("beam five never scores below beam one, and full width bounds every beam") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t T = 3 + rng() % 10;
        const std::size_t C = 2 + rng() % 5;
        const auto lp = log(random_probs(T, C, rng, 2.0));
        const auto blank = static_cast<GlossId>(C - 1);
        const double one = beam_decode(lp, 1, blank)[0].score;
        const double five = beam_decode(lp, 5, blank)[0].score;
        CHECK(five >= one);
        if (T <= 6 && C <= 3) {
            // Wide enough to keep every prefix: the exact maximum.
            const double full = beam_decode(lp, 1u << 12, blank)[0].score;
            for (std::size_t w = 1; w <= 8; ++w) CHECK(full >= beam_decode(lp, w, blank)[0].score - 1e-12);
        }
    }
}

TEST_CASE("word error rate") {
    using V = std::vector<std::string>;
    CHECK(wer(V{"a", "b", "c"}, V{"a", "b", "c"}) == 0.0);
    CHECK(wer(V{"a", "b", "c"}, V{"a", "x", "c"}) == doctest::Approx(100.0 / 3.0).epsilon(1e-15));
    CHECK(wer(V{"a", "b"}, V{"a"}) == 50.0);
    CHECK(wer(V{"a"}, V{"a", "b", "c"}) == 200.0);
    CHECK_THROWS_AS(wer(V{}, V{"a"}), ContractError);

    const auto e = edit_counts(V{"a", "b", "c", "d"}, V{"x", "b", "d", "e"});
    CHECK(e.substitutions + e.insertions + e.deletions == 3);
    CHECK(e.reference_length == 4);

    // Equal-cost alignments prefer a substitution over a deletion plus an insertion.
    const auto s = edit_counts(V{"a"}, V{"b"});
    CHECK(s.substitutions == 1);
    CHECK(s.insertions + s.deletions == 0);
}

TEST_CASE("corpus WER pools edits rather than averaging sentences") {
    CorpusWer corpus;
    corpus.add({0}, {1});              // 1 error over 1
    corpus.add({0, 1, 2, 3}, {0, 1, 2, 3});  // 0 errors over 4
    CHECK(corpus.wer() == doctest::Approx(20.0).epsilon(1e-15));
    CHECK(corpus.counts().errors() == 1);
    CHECK(corpus.counts().reference_length == 5);
}

TEST_CASE("random WER properties") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<GlossId> r(1 + rng() % 6), h(rng() % 6);
        for (auto& g : r) g = static_cast<GlossId>(rng() % 3);
        for (auto& g : h) g = static_cast<GlossId>(rng() % 3);
        const auto e = edit_counts(r, h);
        CHECK(edit_counts(r, r).errors() == 0);
        // Edit distance bounds.
        CHECK(e.errors() >= (r.size() > h.size() ? r.size() - h.size() : h.size() - r.size()));
        CHECK(e.errors() <= std::max(r.size(), h.size()));
        // Counts are consistent with the two lengths.
        CHECK(r.size() - e.deletions + e.insertions == h.size());
    }
}
