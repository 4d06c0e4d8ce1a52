#pragma once

#include <array>
#include <memory>
#include <optional>
#include <vector>

#include "mska/data/keypoints.hpp"
#include "mska/data/layout.hpp"
#include "mska/model/encoder.hpp"
#include "mska/model/heads.hpp"

namespace mska::model {

struct ArchitectureConfig {
    EncoderConfig encoder;
    std::size_t head_width = 512;
    std::vector<data::Stream> streams{data::kAllStreams.begin(), data::kAllStreams.end()};
    bool fuse = true;  // ignored with fewer than two streams

    bool has_stream(data::Stream s) const;
    bool has_fuse() const { return fuse && streams.size() > 1; }
};

/// Per-stream network inputs for a batch, padded by tail-frame repetition to
/// a common length that is a multiple of the encoder downsampling.
struct Batch {
    std::array<core::Value, 4> inputs;   // indexed by Stream, [B, T, N_s, 3]
    std::vector<std::size_t> frames;     // original frame counts
    std::vector<std::size_t> out_frames; // valid head frames, ceil(T / 4)
    std::size_t size() const { return frames.size(); }
};

Batch make_batch(const std::vector<data::KeypointSequence>& sequences, const data::StreamLayout& layout,
                 std::size_t downsampling = 4);

struct ModelOutput {
    std::array<std::optional<HeadOutput>, 4> heads;       // indexed by Stream
    std::array<std::optional<core::Value>, 4> features;   // [B, T', C]
    std::optional<HeadOutput> fuse;
    std::optional<core::Value> fused_features;
    std::vector<std::size_t> lengths;                     // valid T' per sample

    const HeadOutput* head(data::Stream s) const {
        const auto& h = heads[static_cast<std::size_t>(s)];
        return h ? &*h : nullptr;
    }
};

/// Four decoupled keypoint attention streams, one head per stream, and an
/// auxiliary fuse head over the concatenated stream features.
class MskaModel {
public:
    MskaModel(const ArchitectureConfig& config, const data::StreamLayout& layout, std::size_t num_classes,
              std::uint64_t seed);

    ModelOutput forward(const Batch& batch, bool training) const;

    ParameterStore& parameters() { return store_; }
    const ParameterStore& parameters() const { return store_; }
    const ArchitectureConfig& config() const { return config_; }
    const data::StreamLayout& layout() const { return layout_; }
    std::size_t num_classes() const { return num_classes_; }

    StreamEncoder* encoder(data::Stream s) { return encoders_[static_cast<std::size_t>(s)].get(); }
    FuseProjection* fuse_projection() { return fuse_projection_.get(); }

private:
    ArchitectureConfig config_;
    data::StreamLayout layout_;
    std::size_t num_classes_;
    ParameterStore store_;
    std::array<std::unique_ptr<StreamEncoder>, 4> encoders_;
    std::array<std::unique_ptr<HeadNetwork>, 4> heads_;
    std::unique_ptr<FuseProjection> fuse_projection_;
    std::unique_ptr<HeadNetwork> fuse_head_;
};

}  // namespace mska::model
