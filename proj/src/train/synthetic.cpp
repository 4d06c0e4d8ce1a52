#include "mska/train/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <system_error>

#include "mska/data/layout.hpp"
#include "mska/errors.hpp"
#include "mska/text.hpp"

namespace mska::train {
namespace {

constexpr std::size_t kParts = 5;
constexpr std::size_t kLeftWrist = 11;
constexpr std::size_t kRightWrist = 32;
constexpr std::size_t kFaceStart = 53;
constexpr std::size_t kMouthCount = 10;

// Facial slot groups, one per part; together they cover all 26 face slots.
std::vector<std::size_t> face_group(std::size_t part) {
    const std::size_t begin = kFaceStart + 5 * part;
    const std::size_t end = part + 1 == kParts ? kFaceStart + 26 : begin + 5;
    std::vector<std::size_t> out;
    for (std::size_t i = begin; i < end; ++i) out.push_back(i);
    return out;
}

}  // namespace

SyntheticSpec SyntheticSpec::parse(std::string_view content, const std::string& source) {
    SyntheticSpec s;
    std::set<std::string> seen;
    std::size_t line_no = 0;
    for (auto raw : text::split(content, '\n')) {
        ++line_no;
        auto hash = raw.find('#');
        auto line = text::trim(hash == std::string_view::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        auto fail = [&](const std::string& what) {
            throw ConfigError(source + ":" + std::to_string(line_no) + ": " + what);
        };
        auto eq = line.find('=');
        if (eq == std::string_view::npos) fail("expected 'key = value'");
        std::string key(text::trim(line.substr(0, eq)));
        auto value = text::trim(line.substr(eq + 1));
        if (!seen.insert(key).second) fail("duplicate key '" + key + "'");
        auto count = [&]() {
            auto n = text::parse_size(value);
            if (!n) fail("expected a non-negative integer for '" + key + "'");
            return *n;
        };
        auto real = [&]() {
            auto d = text::parse_double(value);
            if (!d) fail("expected a number for '" + key + "'");
            return *d;
        };
        if (key == "vocab_size") s.vocab_size = count();
        else if (key == "train_samples") s.train_samples = count();
        else if (key == "dev_samples") s.dev_samples = count();
        else if (key == "test_samples") s.test_samples = count();
        else if (key == "min_glosses") s.min_glosses = count();
        else if (key == "max_glosses") s.max_glosses = count();
        else if (key == "frames_per_gloss") s.frames_per_gloss = count();
        else if (key == "noise") s.noise = real();
        else if (key == "amplitude") s.amplitude = real();
        else if (key == "image_width") s.image_width = real();
        else if (key == "image_height") s.image_height = real();
        else if (key == "seed") s.seed = count();
        else fail("unknown key '" + key + "'");
    }
    s.validate();
    return s;
}

SyntheticSpec SyntheticSpec::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read spec file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path.string());
}

void SyntheticSpec::validate() const {
    if (vocab_size == 0 || vocab_size > kMaxVocabulary) {
        throw ConfigError("vocab_size must be in [1, " + std::to_string(kMaxVocabulary) + "]");
    }
    if (min_glosses == 0 || min_glosses > max_glosses) throw ConfigError("need 1 <= min_glosses <= max_glosses");
    if (frames_per_gloss < 3) throw ConfigError("frames_per_gloss must be at least 3");
    if (train_samples == 0) throw ConfigError("train_samples must be positive");
    if (!(noise >= 0.0) || !std::isfinite(noise)) throw ConfigError("noise must be finite and non-negative");
    if (!std::isfinite(amplitude)) throw ConfigError("amplitude must be finite");
    if (!(image_width > 0.0) || !(image_height > 0.0)) throw ConfigError("image size must be positive");
}

MotionPrimitive motion_primitive(std::size_t gloss) {
    if (gloss >= SyntheticSpec::kMaxVocabulary) throw ContractError("gloss id beyond the primitive table");
    const std::size_t part = gloss % kParts;
    const std::size_t heading = gloss / kParts;
    MotionPrimitive p;
    for (std::size_t j = 1; j <= 4; ++j) p.joints.push_back(kLeftWrist + 4 * part + j);
    for (std::size_t j = 1; j <= 4; ++j) p.joints.push_back(kRightWrist + 4 * part + j);
    for (auto f : face_group(part)) p.joints.push_back(f);
    p.direction = static_cast<double>(heading) * std::numbers::pi / 2.0 +
                  static_cast<double>(part) * std::numbers::pi / 5.0;
    return p;
}

double primitive_envelope(std::size_t tau, std::size_t frames) {
    return std::sin(std::numbers::pi * static_cast<double>(tau) / static_cast<double>(frames - 1));
}

std::vector<std::array<double, 2>> base_pose(double width, double height) {
    std::vector<std::array<double, 2>> p(data::kNumKeypoints);
    // Upper body: nose, eyes, ears, shoulders, elbows, wrists (left = image right).
    const std::array<std::array<double, 2>, 11> body{{{256, 140},
                                                      {268, 128},
                                                      {244, 128},
                                                      {282, 134},
                                                      {230, 134},
                                                      {316, 220},
                                                      {196, 220},
                                                      {350, 300},
                                                      {162, 300},
                                                      {320, 370},
                                                      {192, 370}}};
    for (std::size_t i = 0; i < body.size(); ++i) p[i] = body[i];

    // Hands: wrist plus five fingers of four joints fanning upwards.
    auto hand = [&](std::size_t wrist_slot, std::array<double, 2> wrist, double mirror) {
        p[wrist_slot] = wrist;
        for (std::size_t f = 0; f < 5; ++f) {
            const double a = -std::numbers::pi / 2.0 + mirror * (static_cast<double>(f) - 2.0) * 0.35;
            for (std::size_t j = 1; j <= 4; ++j) {
                const double r = 10.0 + 9.0 * static_cast<double>(j);
                p[wrist_slot + 4 * f + j] = {wrist[0] + r * std::cos(a), wrist[1] + r * std::sin(a)};
            }
        }
    };
    hand(kLeftWrist, body[9], -1.0);
    hand(kRightWrist, body[10], 1.0);

    // Mouth ring.
    for (std::size_t i = 0; i < kMouthCount; ++i) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / kMouthCount;
        p[kFaceStart + i] = {256.0 + 16.0 * std::cos(a), 160.0 + 7.0 * std::sin(a)};
    }
    // Jaw arc, brows and nose tip.
    std::size_t slot = kFaceStart + kMouthCount;
    for (std::size_t i = 0; i < 9; ++i) {
        const double a = std::numbers::pi * (20.0 + 17.5 * static_cast<double>(i)) / 180.0;
        p[slot++] = {256.0 + 42.0 * std::cos(a), 140.0 + 42.0 * std::sin(a)};
    }
    for (double x : {230.0, 238.0, 246.0, 266.0, 274.0, 282.0}) p[slot++] = {x, 118.0};
    p[slot++] = {256.0, 148.0};

    const double sx = width / 512.0, sy = height / 512.0;
    for (auto& q : p) q = {q[0] * sx, q[1] * sy};
    return p;
}

std::string gloss_name(std::size_t gloss) { return "SIGN" + std::to_string(gloss); }

SyntheticGenerator::SyntheticGenerator(SyntheticSpec spec)
    : spec_(spec), pose_(base_pose(spec.image_width, spec.image_height)) {
    spec_.validate();
}

data::KeypointSequence SyntheticGenerator::render(const std::vector<data::GlossId>& glosses,
                                                  std::mt19937_64& rng) const {
    if (glosses.empty()) throw ContractError("render: empty gloss sequence");
    const std::size_t F = spec_.frames_per_gloss;
    const std::size_t N = data::kNumKeypoints;
    data::KeypointSequence seq(glosses.size() * F, N, spec_.image_width, spec_.image_height);
    std::normal_distribution<double> noise(0.0, 1.0);

    for (std::size_t k = 0; k < glosses.size(); ++k) {
        if (glosses[k] >= spec_.vocab_size) throw ContractError("render: gloss id outside the vocabulary");
        const auto prim = motion_primitive(glosses[k]);
        const double dx = std::cos(prim.direction), dy = std::sin(prim.direction);
        for (std::size_t tau = 0; tau < F; ++tau) {
            const std::size_t t = k * F + tau;
            for (std::size_t n = 0; n < N; ++n) {
                seq.x(t, n) = pose_[n][0];
                seq.y(t, n) = pose_[n][1];
                seq.confidence(t, n) = 0.95;
            }
            const double d = spec_.amplitude * primitive_envelope(tau, F);
            for (auto j : prim.joints) {
                seq.x(t, j) += d * dx;
                seq.y(t, j) += d * dy;
            }
        }
    }
    if (spec_.noise > 0.0) {
        for (std::size_t t = 0; t < seq.frames(); ++t) {
            for (std::size_t n = 0; n < N; ++n) {
                seq.x(t, n) += spec_.noise * noise(rng);
                seq.y(t, n) += spec_.noise * noise(rng);
            }
        }
    }
    return seq;
}

void SyntheticGenerator::write(const std::filesystem::path& dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir / "keypoints", ec);
    if (ec) throw FilesystemError("cannot create " + (dir / "keypoints").string() + ": " + ec.message());

    std::vector<std::string> names;
    for (std::size_t g = 0; g < spec_.vocab_size; ++g) names.push_back(gloss_name(g));
    const data::GlossVocabulary vocab(names);
    vocab.save(dir / data::kVocabularyFile);

    std::mt19937_64 rng(spec_.seed);
    std::uniform_int_distribution<std::size_t> length(spec_.min_glosses, spec_.max_glosses);
    std::uniform_int_distribution<std::size_t> pick(0, spec_.vocab_size - 1);

    std::vector<data::ManifestEntry> manifest;
    const std::array<std::pair<const char*, std::size_t>, 3> splits{
        {{"train", spec_.train_samples}, {"dev", spec_.dev_samples}, {"test", spec_.test_samples}}};
    for (const auto& [split, count] : splits) {
        for (std::size_t i = 0; i < count; ++i) {
            std::vector<data::GlossId> glosses(length(rng));
            for (auto& g : glosses) g = pick(rng);
            const auto seq = render(glosses, rng);

            char id[64];
            std::snprintf(id, sizeof id, "%s_%04zu", split, i);
            data::ManifestEntry e;
            e.id = id;
            e.path = "keypoints/" + e.id + ".txt";
            e.split = split;
            e.glosses = vocab.decode(glosses);
            data::save_sequence(seq, dir / e.path);
            manifest.push_back(std::move(e));
        }
    }
    data::save_manifest(manifest, dir / data::kManifestFile);
}

}  // namespace mska::train
