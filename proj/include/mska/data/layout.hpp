#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

#include "mska/data/keypoints.hpp"

namespace mska::data {

inline constexpr std::size_t kNumKeypoints = 79;

enum class Stream { Left, Right, Face, Body };
inline constexpr std::array<Stream, 4> kAllStreams{Stream::Left, Stream::Right, Stream::Face, Stream::Body};

std::string_view stream_name(Stream s);

enum class KeypointGroup { UpperBody, LeftHand, RightHand, Mouth, FaceOther };

struct KeypointInfo {
    std::size_t wholebody_index;  // index into the 133-point COCO-WholeBody set
    KeypointGroup group;
};

/// The 79 keypoints ingested by the model, in file order. Slots 0-10 are the
/// upper body, 11-31 the left hand, 32-52 the right hand, 53-62 the mouth
/// and 63-78 the remaining facial points.
const std::array<KeypointInfo, kNumKeypoints>& keypoint_table();

/// Index lists carving a keypoint set into the four streams.
struct StreamLayout {
    std::vector<std::size_t> left_hand;
    std::vector<std::size_t> right_hand;
    std::vector<std::size_t> face;
    std::vector<std::size_t> body;
    std::size_t num_keypoints = 0;

    /// Layout over the fixed 79-keypoint table (21 / 21 / 26 / 79).
    static StreamLayout standard();

    const std::vector<std::size_t>& indices(Stream s) const;
    std::size_t joints(Stream s) const { return indices(s).size(); }

    /// Checks ranges, that the hands are disjoint and that body covers every
    /// index. Throws InputError.
    void validate() const;
};

struct StreamSequences {
    KeypointSequence left;
    KeypointSequence right;
    KeypointSequence face;
    KeypointSequence body;

    const KeypointSequence& get(Stream s) const;
};

/// Splits a normalized sequence into per-stream sub-sequences, keeping
/// index order within each stream.
StreamSequences decouple(const KeypointSequence& seq, const StreamLayout& layout);

}  // namespace mska::data
