#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "mska/data/keypoints.hpp"

namespace mska::augment {

using Rng = std::mt19937_64;

struct AugmentConfig {
    bool temporal = true;
    bool rotate = true;
    bool scale = false;
    bool translate = false;

    double temporal_min = 0.5;
    double temporal_max = 1.5;
    double rotate_max = 0.227;  // radians, symmetric range (about 13 degrees)
    // Placeholder ranges: the scale/translate transforms are off by default.
    double scale_min = 0.9;
    double scale_max = 1.1;
    double translate_max = 0.1;  // per axis, symmetric, normalized units

    void validate() const;
};

/// Sorted frame indices for a resample to round(T * factor) frames. Shrinking
/// draws distinct frames; stretching keeps every frame once and draws the
/// surplus with replacement.
std::vector<std::size_t> resample_indices(std::size_t frames, double factor, Rng& rng);

data::KeypointSequence temporal_resample(const data::KeypointSequence& seq, double factor, Rng& rng);

/// Counter-clockwise rotation of every (x, y) about the origin.
data::KeypointSequence rotate(const data::KeypointSequence& seq, double theta);
data::KeypointSequence scale(const data::KeypointSequence& seq, double factor);
data::KeypointSequence translate(const data::KeypointSequence& seq, std::array<double, 2> offset);

/// Applies the enabled transforms in the order temporal, rotate, scale,
/// translate.
data::KeypointSequence augment_pipeline(const data::KeypointSequence& seq, const AugmentConfig& config,
                                        Rng& rng);

/// Independent per-sample stream derived from (seed, epoch, sample index).
Rng sample_rng(std::uint64_t seed, std::uint64_t epoch, std::uint64_t sample);

}  // namespace mska::augment
