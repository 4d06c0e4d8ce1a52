#include "mska/data/keypoints.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "mska/errors.hpp"
#include "mska/text.hpp"

namespace mska::data {

KeypointSequence::KeypointSequence(std::size_t frames, std::size_t joints, double width,
                                   double height, bool normalized)
    : KeypointSequence(frames, joints, width, height,
                       std::vector<double>(frames * joints * kChannels, 0.0), normalized) {}

KeypointSequence::KeypointSequence(std::size_t frames, std::size_t joints, double width,
                                   double height, std::vector<double> values, bool normalized)
    : frames_(frames),
      joints_(joints),
      width_(width),
      height_(height),
      normalized_(normalized),
      values_(std::move(values)) {
    if (frames_ == 0 || joints_ == 0) throw InputError("keypoint sequence needs T >= 1 and N >= 1");
    if (values_.size() != frames_ * joints_ * kChannels) {
        throw InputError("keypoint sequence: expected " + std::to_string(frames_ * joints_ * kChannels) +
                         " values, got " + std::to_string(values_.size()));
    }
}

KeypointSequence KeypointSequence::select_frames(const std::vector<std::size_t>& frame_indices) const {
    if (frame_indices.empty()) throw InputError("select_frames: empty selection");
    std::vector<double> out;
    out.reserve(frame_indices.size() * joints_ * kChannels);
    const std::size_t stride = joints_ * kChannels;
    for (auto t : frame_indices) {
        if (t >= frames_) throw InputError("select_frames: frame index out of range");
        out.insert(out.end(), values_.begin() + t * stride, values_.begin() + (t + 1) * stride);
    }
    return {frame_indices.size(), joints_, width_, height_, std::move(out), normalized_};
}

KeypointSequence KeypointSequence::select_joints(const std::vector<std::size_t>& joint_indices) const {
    if (joint_indices.empty()) throw InputError("select_joints: empty selection");
    std::vector<double> out;
    out.reserve(frames_ * joint_indices.size() * kChannels);
    for (std::size_t t = 0; t < frames_; ++t) {
        for (auto n : joint_indices) {
            if (n >= joints_) throw InputError("select_joints: joint index out of range");
            const auto* p = values_.data() + index(t, n);
            out.insert(out.end(), p, p + kChannels);
        }
    }
    return {frames_, joint_indices.size(), width_, height_, std::move(out), normalized_};
}

KeypointSequence normalize(const KeypointSequence& seq) {
    if (seq.normalized()) throw ContractError("normalize: sequence is already normalized");
    if (!(seq.width() > 0.0) || !(seq.height() > 0.0)) {
        throw InputError("normalize: image width and height must be positive");
    }
    KeypointSequence out = seq;
    const double w = seq.width();
    const double h = seq.height();
    for (std::size_t t = 0; t < seq.frames(); ++t) {
        for (std::size_t n = 0; n < seq.joints(); ++n) {
            out.x(t, n) = (seq.x(t, n) / w - 0.5) / 0.5;
            out.y(t, n) = ((h - seq.y(t, n)) / h - 0.5) / 0.5;
        }
    }
    out.set_normalized(true);
    return out;
}

KeypointSequence denormalize(const KeypointSequence& seq) {
    if (!seq.normalized()) throw ContractError("denormalize: sequence is not normalized");
    KeypointSequence out = seq;
    const double w = seq.width();
    const double h = seq.height();
    for (std::size_t t = 0; t < seq.frames(); ++t) {
        for (std::size_t n = 0; n < seq.joints(); ++n) {
            out.x(t, n) = (seq.x(t, n) * 0.5 + 0.5) * w;
            out.y(t, n) = h - (seq.y(t, n) * 0.5 + 0.5) * h;
        }
    }
    out.set_normalized(false);
    return out;
}

void save_sequence(const KeypointSequence& seq, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FilesystemError("cannot write " + path.string());
    os << seq.frames() << ' ' << seq.joints() << ' ' << text::format_double(seq.width()) << ' '
       << text::format_double(seq.height()) << '\n';
    std::string line;
    for (std::size_t t = 0; t < seq.frames(); ++t) {
        line.clear();
        for (std::size_t n = 0; n < seq.joints(); ++n) {
            if (n) line += ' ';
            line += text::format_double(seq.x(t, n));
            line += ' ';
            line += text::format_double(seq.y(t, n));
            line += ' ';
            line += text::format_double(seq.confidence(t, n));
        }
        line += '\n';
        os << line;
    }
    if (!os) throw FilesystemError("write failed for " + path.string());
}

KeypointSequence load_sequence(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FilesystemError("cannot open " + path.string());
    const std::string source = path.string();
    std::string line;
    std::size_t line_no = 0;

    auto next_line = [&]() -> bool {
        while (std::getline(is, line)) {
            ++line_no;
            if (!text::trim(line).empty()) return true;
        }
        return false;
    };

    if (!next_line()) throw ParseError(source, line_no + 1, "missing header `T N W H`");
    const auto header = text::split_ws(line);
    if (header.size() != 4) throw ParseError(source, line_no, "header must have 4 fields `T N W H`");
    const auto frames = text::parse_size(header[0]);
    const auto joints = text::parse_size(header[1]);
    const auto width = text::parse_double(header[2]);
    const auto height = text::parse_double(header[3]);
    if (!frames || !joints || !width || !height || *frames == 0 || *joints == 0) {
        throw ParseError(source, line_no, "malformed header `" + line + "`");
    }

    std::vector<double> values;
    values.reserve(*frames * *joints * kChannels);
    for (std::size_t t = 0; t < *frames; ++t) {
        if (!next_line()) {
            throw ParseError(source, line_no + 1,
                             "expected " + std::to_string(*frames) + " frame rows, found " + std::to_string(t));
        }
        const auto fields = text::split_ws(line);
        if (fields.size() != *joints * kChannels) {
            throw ParseError(source, line_no,
                             "expected " + std::to_string(*joints * kChannels) + " values, found " +
                                 std::to_string(fields.size()));
        }
        for (const auto& f : fields) {
            const auto v = text::parse_double(f);
            if (!v) throw ParseError(source, line_no, "not a number: `" + std::string(f) + "`");
            values.push_back(*v);
        }
    }
    if (next_line()) {
        throw ParseError(source, line_no, "unexpected data after " + std::to_string(*frames) + " frame rows");
    }
    return {*frames, *joints, *width, *height, std::move(values), false};
}

}  // namespace mska::data
