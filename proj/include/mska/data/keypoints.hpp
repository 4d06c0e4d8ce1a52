#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace mska::data {

inline constexpr std::size_t kChannels = 3;  // x, y, confidence

/// T x N x 3 array of (x, y, confidence) for one clip plus the source image
/// size. Raw sequences are in pixels with +Y down; normalized ones are
/// centred with +Y up.
class KeypointSequence {
public:
    KeypointSequence() = default;
    KeypointSequence(std::size_t frames, std::size_t joints, double width, double height,
                     bool normalized = false);
    KeypointSequence(std::size_t frames, std::size_t joints, double width, double height,
                     std::vector<double> values, bool normalized = false);

    std::size_t frames() const noexcept { return frames_; }
    std::size_t joints() const noexcept { return joints_; }
    double width() const noexcept { return width_; }
    double height() const noexcept { return height_; }
    bool normalized() const noexcept { return normalized_; }

    double& x(std::size_t t, std::size_t n) { return values_[index(t, n)]; }
    double& y(std::size_t t, std::size_t n) { return values_[index(t, n) + 1]; }
    double& confidence(std::size_t t, std::size_t n) { return values_[index(t, n) + 2]; }
    double x(std::size_t t, std::size_t n) const { return values_[index(t, n)]; }
    double y(std::size_t t, std::size_t n) const { return values_[index(t, n) + 1]; }
    double confidence(std::size_t t, std::size_t n) const { return values_[index(t, n) + 2]; }

    /// Row-major [T][N][3] storage.
    const std::vector<double>& values() const noexcept { return values_; }
    std::vector<double>& values() noexcept { return values_; }

    void set_normalized(bool v) noexcept { normalized_ = v; }

    /// New sequence made of the listed frames (repeats allowed).
    KeypointSequence select_frames(const std::vector<std::size_t>& frame_indices) const;
    /// New sequence made of the listed joints in the given order.
    KeypointSequence select_joints(const std::vector<std::size_t>& joint_indices) const;

    bool operator==(const KeypointSequence&) const = default;

private:
    std::size_t index(std::size_t t, std::size_t n) const { return (t * joints_ + n) * kChannels; }

    std::size_t frames_ = 0;
    std::size_t joints_ = 0;
    double width_ = 0.0;
    double height_ = 0.0;
    bool normalized_ = false;
    std::vector<double> values_;
};

/// Maps pixel coordinates to ((x / W, (H - y) / H) - 0.5) / 0.5. Points
/// outside the image land outside [-1, 1]; nothing is clamped.
KeypointSequence normalize(const KeypointSequence& seq);

/// Inverse of normalize().
KeypointSequence denormalize(const KeypointSequence& seq);

/// Text format: first line `T N W H`, then T lines of N `x y c` triples.
void save_sequence(const KeypointSequence& seq, const std::filesystem::path& path);
KeypointSequence load_sequence(const std::filesystem::path& path);

}  // namespace mska::data
