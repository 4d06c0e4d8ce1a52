#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mska/data/dataset.hpp"
#include "mska/data/keypoints.hpp"

namespace mska::train {

/// Parameters of the synthetic sign corpus. Parsed from `key = value` lines.
struct SyntheticSpec {
    std::size_t vocab_size = 5;
    std::size_t train_samples = 50;
    std::size_t dev_samples = 20;
    std::size_t test_samples = 20;
    std::size_t min_glosses = 2;
    std::size_t max_glosses = 5;
    std::size_t frames_per_gloss = 12;
    double noise = 1.0;        // coordinate noise std, pixels
    double amplitude = 80.0;   // peak displacement, pixels
    double image_width = 512.0;
    double image_height = 512.0;
    std::uint64_t seed = 7;

    static constexpr std::size_t kMaxVocabulary = 20;

    static SyntheticSpec parse(std::string_view text, const std::string& source = "<spec>");
    static SyntheticSpec load(const std::filesystem::path& path);
    void validate() const;  // throws ConfigError
};

/// One gloss: a bump-shaped excursion of a keypoint subset along a fixed
/// direction. The subsets of different glosses never coincide.
struct MotionPrimitive {
    std::vector<std::size_t> joints;  // slots in the 79-keypoint layout
    double direction = 0.0;           // radians, image coordinates (+y down)
};

/// Gloss g drives body part g % 5 (finger g % 5 of both hands plus one facial
/// group) in direction index g / 5.
MotionPrimitive motion_primitive(std::size_t gloss);

/// Displacement scale of frame `tau` of a primitive lasting `frames` frames:
/// sin(pi * tau / (frames - 1)).
double primitive_envelope(std::size_t tau, std::size_t frames);

/// Resting 79-keypoint pose in pixels for a 512 x 512 image, scaled to the
/// configured image size.
std::vector<std::array<double, 2>> base_pose(double width = 512.0, double height = 512.0);

std::string gloss_name(std::size_t gloss);

class SyntheticGenerator {
public:
    explicit SyntheticGenerator(SyntheticSpec spec);

    /// Raw pixel-space sequence realizing `glosses`, one primitive after the
    /// other, plus Gaussian noise drawn from `rng`.
    data::KeypointSequence render(const std::vector<data::GlossId>& glosses, std::mt19937_64& rng) const;

    /// Writes vocab.txt, manifest.tsv and keypoints/<id>.txt under `dir`.
    void write(const std::filesystem::path& dir) const;

    const SyntheticSpec& spec() const { return spec_; }

private:
    SyntheticSpec spec_;
    std::vector<std::array<double, 2>> pose_;
};

}  // namespace mska::train
