#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "mska/data/dataset.hpp"
#include "mska/data/keypoints.hpp"
#include "mska/data/layout.hpp"
#include "mska/errors.hpp"

using namespace mska;
using namespace mska::data;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("mska_test_data_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

KeypointSequence random_sequence(std::size_t T, std::size_t N, std::uint64_t seed, double W = 640, double H = 480) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    KeypointSequence s(T, N, W, H);
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t n = 0; n < N; ++n) {
            s.x(t, n) = u(rng) * W;
            s.y(t, n) = u(rng) * H;
            s.confidence(t, n) = u(rng);
        }
    return s;
}

void write_text(const fs::path& p, const std::string& content) {
    std::ofstream os(p, std::ios::binary);
    os << content;
}

}  // namespace

TEST_CASE("normalize maps the centre to the origin and the corners to unit coordinates") {
    KeypointSequence s(1, 5, 640, 480);
    const double pts[5][2] = {{320, 240}, {0, 480}, {640, 0}, {0, 0}, {640, 480}};
    for (std::size_t n = 0; n < 5; ++n) {
        s.x(0, n) = pts[n][0];
        s.y(0, n) = pts[n][1];
        s.confidence(0, n) = 0.25 * static_cast<double>(n);
    }
    const auto z = normalize(s);
    CHECK(z.normalized());
    CHECK(z.x(0, 0) == 0.0);
    CHECK(z.y(0, 0) == 0.0);
    CHECK(z.x(0, 1) == -1.0);
    CHECK(z.y(0, 1) == -1.0);
    CHECK(z.x(0, 2) == 1.0);
    CHECK(z.y(0, 2) == 1.0);
    CHECK(z.x(0, 3) == -1.0);
    CHECK(z.y(0, 3) == 1.0);
    CHECK(z.x(0, 4) == 1.0);
    CHECK(z.y(0, 4) == -1.0);
    for (std::size_t n = 0; n < 5; ++n) CHECK(z.confidence(0, n) == s.confidence(0, n));
}

TEST_CASE("normalize keeps in-image points inside the unit square and inverts exactly enough") {
    const auto s = random_sequence(6, 79, 11);
    const auto z = normalize(s);
    for (std::size_t t = 0; t < 6; ++t)
        for (std::size_t n = 0; n < 79; ++n) {
            CHECK(std::abs(z.x(t, n)) <= 1.0);
            CHECK(std::abs(z.y(t, n)) <= 1.0);
        }
    const auto back = denormalize(z);
    for (std::size_t i = 0; i < s.values().size(); ++i) CHECK(back.values()[i] == doctest::Approx(s.values()[i]).epsilon(1e-12));
}

TEST_CASE("normalize rejects bad image sizes and double application") {
    CHECK_THROWS_AS(normalize(KeypointSequence(1, 1, 0.0, 10.0)), InputError);
    CHECK_THROWS_AS(normalize(KeypointSequence(1, 1, 10.0, -1.0)), InputError);
    const auto z = normalize(random_sequence(2, 3, 1));
    CHECK_THROWS_AS(normalize(z), ContractError);
}

TEST_CASE("sequence files round-trip exactly") {
    const auto dir = scratch("roundtrip");
    const auto s = random_sequence(4, 79, 5);
    save_sequence(s, dir / "a.txt");
    const auto r = load_sequence(dir / "a.txt");
    CHECK(r == s);
}

TEST_CASE("malformed sequence files fail with the offending line") {
    const auto dir = scratch("malformed");
    SUBCASE("too few frame rows") {
        std::string body = "3 79 640 480\n";
        for (int t = 0; t < 2; ++t) {
            for (int n = 0; n < 79; ++n) body += "1 2 0.5 ";
            body += "\n";
        }
        write_text(dir / "short.txt", body);
        try {
            load_sequence(dir / "short.txt");
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("expected 3 frame rows, found 2") != std::string::npos);
        }
    }
    SUBCASE("truncated row") {
        write_text(dir / "trunc.txt", "1 2 640 480\n1 2 3 4 5\n");
        try {
            load_sequence(dir / "trunc.txt");
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 2);
        }
    }
    SUBCASE("trailing data and junk") {
        write_text(dir / "extra.txt", "1 1 640 480\n1 2 3\n4 5 6\n");
        CHECK_THROWS_AS(load_sequence(dir / "extra.txt"), ParseError);
        write_text(dir / "junk.txt", "1 1 640 480\n1 x 3\n");
        CHECK_THROWS_AS(load_sequence(dir / "junk.txt"), ParseError);
        CHECK_THROWS_AS(load_sequence(dir / "missing.txt"), FilesystemError);
    }
}

TEST_CASE("standard layout sizes and disjoint hands") {
    const auto layout = StreamLayout::standard();
    CHECK(layout.joints(Stream::Left) == 21);
    CHECK(layout.joints(Stream::Right) == 21);
    CHECK(layout.joints(Stream::Face) == 26);
    CHECK(layout.joints(Stream::Body) == 79);
    std::set<std::size_t> left(layout.left_hand.begin(), layout.left_hand.end());
    for (auto i : layout.right_hand) CHECK(left.count(i) == 0);
    CHECK_NOTHROW(layout.validate());

    auto broken = layout;
    broken.right_hand[0] = broken.left_hand[0];
    CHECK_THROWS_AS(broken.validate(), InputError);
}

TEST_CASE("keypoint table groups match the whole-body source indices") {
    const auto& table = keypoint_table();
    std::set<std::size_t> sources;
    std::size_t counts[5] = {};
    for (const auto& k : table) {
        sources.insert(k.wholebody_index);
        CHECK(k.wholebody_index < 133);
        ++counts[static_cast<int>(k.group)];
    }
    CHECK(sources.size() == 79);
    CHECK(counts[static_cast<int>(KeypointGroup::UpperBody)] == 11);
    CHECK(counts[static_cast<int>(KeypointGroup::LeftHand)] == 21);
    CHECK(counts[static_cast<int>(KeypointGroup::RightHand)] == 21);
    CHECK(counts[static_cast<int>(KeypointGroup::Mouth)] == 10);
    CHECK(counts[static_cast<int>(KeypointGroup::FaceOther)] == 16);
    CHECK(table[11].wholebody_index == 91);
    CHECK(table[32].wholebody_index == 112);
}

TEST_CASE("decouple selects stream joints and preserves confidences") {
    const auto z = normalize(random_sequence(3, 79, 8));
    const auto layout = StreamLayout::standard();
    const auto streams = decouple(z, layout);
    CHECK(streams.body == z);
    for (auto s : kAllStreams) {
        const auto& part = streams.get(s);
        const auto& idx = layout.indices(s);
        REQUIRE(part.joints() == idx.size());
        for (std::size_t t = 0; t < 3; ++t)
            for (std::size_t j = 0; j < idx.size(); ++j) {
                CHECK(part.x(t, j) == z.x(t, idx[j]));
                CHECK(part.y(t, j) == z.y(t, idx[j]));
                CHECK(part.confidence(t, j) == z.confidence(t, idx[j]));
            }
    }
    CHECK_THROWS_AS(decouple(random_sequence(1, 79, 1), layout), ContractError);
    CHECK_THROWS_AS(decouple(normalize(random_sequence(1, 40, 1)), layout), InputError);
}

TEST_CASE("vocabulary ids are dense with the blank last") {
    const GlossVocabulary v({"HELLO", "WORLD", "RAIN"});
    CHECK(v.blank_id() == 3);
    CHECK(v.num_classes() == 4);
    for (const auto& g : v.glosses()) CHECK(v.gloss(v.id(g)) == g);
    CHECK(v.decode(v.encode({"RAIN", "HELLO"})) == std::vector<std::string>{"RAIN", "HELLO"});
    CHECK_THROWS_AS(v.id("SNOW"), InputError);
    CHECK_THROWS_AS(GlossVocabulary({"A", "A"}), InputError);
}

TEST_CASE("dataset directory loads, normalizes and splits") {
    const auto dir = scratch("dataset");
    const GlossVocabulary vocab({"A", "B"});
    vocab.save(dir / kVocabularyFile);
    fs::create_directories(dir / "kp");
    save_sequence(random_sequence(5, 79, 1), dir / "kp/s0.txt");
    save_sequence(random_sequence(7, 79, 2), dir / "kp/s1.txt");
    save_manifest({{"s0", "kp/s0.txt", "train", {"A", "B"}}, {"s1", "kp/s1.txt", "dev", {"B"}}},
                  dir / kManifestFile);

    const auto d = Dataset::load(dir);
    REQUIRE(d.samples.size() == 2);
    CHECK(d.samples[0].keypoints.normalized());
    CHECK(d.samples[0].target == std::vector<GlossId>{0, 1});
    CHECK(d.split("dev").size() == 1);
    CHECK(d.has_split("train"));
    CHECK_FALSE(d.has_split("test"));

    write_text(dir / kManifestFile, "s0\tkp/s0.txt\ttrain\tA C\n");
    try {
        Dataset::load(dir);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 1);
    }
}
