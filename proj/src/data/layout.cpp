#include "mska/data/layout.hpp"

#include <algorithm>

#include "mska/errors.hpp"

namespace mska::data {

std::string_view stream_name(Stream s) {
    switch (s) {
        case Stream::Left: return "left";
        case Stream::Right: return "right";
        case Stream::Face: return "face";
        case Stream::Body: return "body";
    }
    return "?";
}

namespace {

std::array<KeypointInfo, kNumKeypoints> build_table() {
    std::array<KeypointInfo, kNumKeypoints> t{};
    std::size_t k = 0;
    // nose, eyes, ears, shoulders, elbows, wrists
    for (std::size_t i = 0; i <= 10; ++i) t[k++] = {i, KeypointGroup::UpperBody};
    for (std::size_t i = 91; i <= 111; ++i) t[k++] = {i, KeypointGroup::LeftHand};
    for (std::size_t i = 112; i <= 132; ++i) t[k++] = {i, KeypointGroup::RightHand};
    // outer lip every other point, inner lip every other point
    for (std::size_t i = 71; i <= 81; i += 2) t[k++] = {i, KeypointGroup::Mouth};
    for (std::size_t i = 83; i <= 89; i += 2) t[k++] = {i, KeypointGroup::Mouth};
    // jaw line, both brows, nose tip
    for (std::size_t i = 23; i <= 39; i += 2) t[k++] = {i, KeypointGroup::FaceOther};
    for (std::size_t i : {40, 42, 44, 45, 47, 49}) t[k++] = {i, KeypointGroup::FaceOther};
    t[k++] = {53, KeypointGroup::FaceOther};
    return t;
}

}  // namespace

const std::array<KeypointInfo, kNumKeypoints>& keypoint_table() {
    static const auto table = build_table();
    return table;
}

StreamLayout StreamLayout::standard() {
    StreamLayout l;
    l.num_keypoints = kNumKeypoints;
    const auto& table = keypoint_table();
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
        switch (table[i].group) {
            case KeypointGroup::LeftHand: l.left_hand.push_back(i); break;
            case KeypointGroup::RightHand: l.right_hand.push_back(i); break;
            case KeypointGroup::Mouth:
            case KeypointGroup::FaceOther: l.face.push_back(i); break;
            case KeypointGroup::UpperBody: break;
        }
        l.body.push_back(i);
    }
    return l;
}

const std::vector<std::size_t>& StreamLayout::indices(Stream s) const {
    switch (s) {
        case Stream::Left: return left_hand;
        case Stream::Right: return right_hand;
        case Stream::Face: return face;
        case Stream::Body: return body;
    }
    throw ContractError("unknown stream");
}

void StreamLayout::validate() const {
    for (Stream s : kAllStreams) {
        const auto& idx = indices(s);
        if (idx.empty()) throw InputError("stream layout: " + std::string(stream_name(s)) + " is empty");
        for (auto i : idx) {
            if (i >= num_keypoints) throw InputError("stream layout: index out of range");
        }
    }
    for (auto i : left_hand) {
        if (std::find(right_hand.begin(), right_hand.end(), i) != right_hand.end()) {
            throw InputError("stream layout: hands overlap");
        }
    }
    std::vector<bool> covered(num_keypoints, false);
    for (auto i : body) covered[i] = true;
    if (!std::all_of(covered.begin(), covered.end(), [](bool b) { return b; })) {
        throw InputError("stream layout: body stream must cover every keypoint");
    }
}

const KeypointSequence& StreamSequences::get(Stream s) const {
    switch (s) {
        case Stream::Left: return left;
        case Stream::Right: return right;
        case Stream::Face: return face;
        case Stream::Body: return body;
    }
    throw ContractError("unknown stream");
}

StreamSequences decouple(const KeypointSequence& seq, const StreamLayout& layout) {
    if (!seq.normalized()) throw ContractError("decouple: sequence must be normalized first");
    if (seq.joints() != layout.num_keypoints) {
        throw InputError("decouple: expected " + std::to_string(layout.num_keypoints) + " keypoints, got " +
                         std::to_string(seq.joints()));
    }
    return {seq.select_joints(layout.left_hand), seq.select_joints(layout.right_hand),
            seq.select_joints(layout.face), seq.select_joints(layout.body)};
}

}  // namespace mska::data
