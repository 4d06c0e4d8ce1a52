#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mska/core/value.hpp"
#include "mska/model/params.hpp"

namespace mska::model {

struct EncoderConfig {
    std::vector<std::size_t> channels{64, 64, 128, 128, 256, 256, 256, 256};
    std::vector<std::size_t> strides{1, 1, 2, 1, 2, 1, 1, 1};
    std::size_t heads = 6;
    std::size_t embed_channels = 0;  // 0: max(8, out_channels / 4) per block
    std::size_t in_channels = 3;
    bool global_regularization = true;

    std::size_t blocks() const { return channels.size(); }
    std::size_t out_channels() const { return channels.back(); }
    std::size_t embed_for(std::size_t block) const;
    /// Product of the temporal strides.
    std::size_t downsampling() const;

    /// Channel list and stride list must agree in length, strides must
    /// multiply to 4, heads >= 1. Throws ContractError.
    void validate() const;
};

/// Sinusoidal spatial encoding, row p = joint, column d = channel:
/// sin(p / 10000^(2i/C)) for d = 2i and cos(p / 10000^(2i/C)) for d = 2i+1.
std::vector<double> positional_encoding(std::size_t joints, std::size_t channels);

struct AttentionHeadParams {
    core::Value query_weight, query_bias;  // [C, E], [E]
    core::Value key_weight, key_bias;
    core::Value global_attention;          // [N, N], learned, shared by all samples
};

struct AttentionHeadResult {
    core::Value output;     // [B, T, N, C]
    core::Value attention;  // [B, N, N], dynamic + global
    core::Value dynamic;    // [B, N, N], tanh scores in (-1, 1)
};

/// Tanh-scored spatial attention for one head. `x` is [B, T, N, C] with the
/// positional encoding already added. Scores are Q K^T summed over frames
/// and embedding channels, divided by sqrt(E) * T. The output routes joints:
/// out[b, t, n, :] = sum_m A[b, n, m] * x[b, t, m, :].
AttentionHeadResult attention_head(const core::Value& x, const AttentionHeadParams& params,
                                   bool global_regularization);

/// One keypoint attention module: multi-head spatial attention, output
/// projection with residual, feed-forward with residual, then a kernel-3
/// temporal convolution.
class AttentionBlock {
public:
    AttentionBlock(ParameterStore& store, const std::string& name, std::size_t joints,
                   std::size_t in_channels, std::size_t out_channels, std::size_t heads,
                   std::size_t embed, std::size_t stride, Initializer& init);

    core::Value forward(const core::Value& x, bool global_regularization) const;

    std::size_t in_channels() const { return in_channels_; }
    std::size_t out_channels() const { return out_channels_; }
    std::size_t stride() const { return temporal_.stride; }
    std::vector<AttentionHeadParams>& heads() { return heads_; }
    const std::vector<AttentionHeadParams>& heads() const { return heads_; }
    /// [N, C_in] constant added to the block input.
    core::Value& positional() { return positional_; }

private:
    std::size_t joints_, in_channels_, out_channels_;
    std::vector<AttentionHeadParams> heads_;
    core::Value positional_;
    Linear out1_, out2_, feedforward_;
    Linear residual1_, residual2_;  // only when channel counts differ
    TemporalConv temporal_;
};

/// Stack of attention blocks for one stream followed by mean pooling over
/// joints: [B, T, N, C_in] -> [B, ceil(T / 4), C_out].
class StreamEncoder {
public:
    StreamEncoder(ParameterStore& store, const std::string& name, std::size_t joints,
                  const EncoderConfig& config, Initializer& init);

    core::Value forward(const core::Value& x) const;
    /// Block stack output before pooling, [B, T', N, C_out].
    core::Value forward_blocks(const core::Value& x) const;

    std::size_t joints() const { return joints_; }
    std::vector<AttentionBlock>& blocks() { return blocks_; }
    const EncoderConfig& config() const { return config_; }

private:
    std::size_t joints_;
    EncoderConfig config_;
    std::vector<AttentionBlock> blocks_;
};

}  // namespace mska::model
