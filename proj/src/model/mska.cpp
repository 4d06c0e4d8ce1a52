#include "mska/model/mska.hpp"

#include <algorithm>

#include "mska/errors.hpp"

namespace mska::model {

using core::Value;
using data::Stream;

bool ArchitectureConfig::has_stream(Stream s) const {
    return std::find(streams.begin(), streams.end(), s) != streams.end();
}

Batch make_batch(const std::vector<data::KeypointSequence>& sequences, const data::StreamLayout& layout,
                 std::size_t downsampling) {
    if (sequences.empty()) throw InputError("make_batch: empty batch");
    Batch batch;
    std::size_t max_frames = 0;
    for (const auto& s : sequences) {
        if (!s.normalized()) throw ContractError("make_batch: sequences must be normalized");
        if (s.joints() != layout.num_keypoints) {
            throw InputError("make_batch: expected " + std::to_string(layout.num_keypoints) + " keypoints, got " +
                             std::to_string(s.joints()));
        }
        max_frames = std::max(max_frames, s.frames());
        batch.frames.push_back(s.frames());
        batch.out_frames.push_back((s.frames() + downsampling - 1) / downsampling);
    }
    const std::size_t padded = (max_frames + downsampling - 1) / downsampling * downsampling;
    const std::size_t count = sequences.size();
    for (Stream st : data::kAllStreams) {
        const auto& idx = layout.indices(st);
        const std::size_t joints = idx.size();
        std::vector<double> buf(count * padded * joints * data::kChannels);
        for (std::size_t b = 0; b < count; ++b) {
            const auto& seq = sequences[b];
            for (std::size_t t = 0; t < padded; ++t) {
                const std::size_t src_t = std::min(t, seq.frames() - 1);
                for (std::size_t j = 0; j < joints; ++j) {
                    double* dst = buf.data() + ((b * padded + t) * joints + j) * data::kChannels;
                    dst[0] = seq.x(src_t, idx[j]);
                    dst[1] = seq.y(src_t, idx[j]);
                    dst[2] = seq.confidence(src_t, idx[j]);
                }
            }
        }
        batch.inputs[static_cast<std::size_t>(st)] =
            Value::constant({count, padded, joints, data::kChannels}, std::move(buf));
    }
    return batch;
}

MskaModel::MskaModel(const ArchitectureConfig& config, const data::StreamLayout& layout,
                     std::size_t num_classes, std::uint64_t seed)
    : config_(config), layout_(layout), num_classes_(num_classes) {
    config_.encoder.validate();
    if (config_.streams.empty()) throw ContractError("model: at least one stream required");
    if (num_classes_ < 2) throw ContractError("model: need at least one gloss plus blank");
    if (config_.head_width == 0) throw ContractError("model: head width must be positive");
    Initializer init(seed);
    const std::size_t channels = config_.encoder.out_channels();
    for (Stream s : data::kAllStreams) {
        if (!config_.has_stream(s)) continue;
        const std::string name(data::stream_name(s));
        encoders_[static_cast<std::size_t>(s)] =
            std::make_unique<StreamEncoder>(store_, name + ".encoder", layout_.joints(s), config_.encoder, init);
        heads_[static_cast<std::size_t>(s)] =
            std::make_unique<HeadNetwork>(store_, name + ".head", channels, config_.head_width, num_classes_, init);
    }
    if (config_.has_fuse()) {
        fuse_projection_ = std::make_unique<FuseProjection>(store_, "fuse.projection", config_.streams.size(),
                                                            channels, init);
        fuse_head_ = std::make_unique<HeadNetwork>(store_, "fuse.head", channels, config_.head_width,
                                                   num_classes_, init);
    }
}

ModelOutput MskaModel::forward(const Batch& batch, bool training) const {
    ModelOutput out;
    out.lengths = batch.out_frames;
    std::vector<Value> fuse_inputs;
    for (Stream s : data::kAllStreams) {
        const auto k = static_cast<std::size_t>(s);
        if (!encoders_[k]) continue;
        Value features = encoders_[k]->forward(batch.inputs[k]);
        out.heads[k] = heads_[k]->forward(features, training);
        fuse_inputs.push_back(features);
        out.features[k] = std::move(features);
    }
    if (fuse_head_) {
        Value fused = fuse_projection_->forward(fuse_inputs);
        out.fuse = fuse_head_->forward(fused, training);
        out.fused_features = std::move(fused);
    }
    return out;
}

}  // namespace mska::model
