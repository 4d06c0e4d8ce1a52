#pragma once

#include <string>
#include <vector>

#include "mska/core/ops.hpp"
#include "mska/model/params.hpp"

namespace mska::model {

struct HeadOutput {
    core::Value representation;  // [B, T', width], the gloss representation
    core::Value log_probs;       // [B, T', V + 1]
};

/// linear -> batch norm -> relu -> conv -> relu -> conv -> linear -> relu
/// gives the gloss representation; a classifier with log-softmax gives
/// per-frame gloss log-probabilities.
class HeadNetwork {
public:
    HeadNetwork(ParameterStore& store, const std::string& name, std::size_t in_channels, std::size_t width,
                std::size_t classes, Initializer& init);

    /// x: [B, T', C_in]. Training mode uses batch statistics.
    HeadOutput forward(const core::Value& x, bool training) const;

    std::size_t width() const { return width_; }
    std::size_t classes() const { return classes_; }

private:
    std::size_t in_channels_, width_, classes_;
    Linear temporal_linear_;
    core::Value bn_gamma_, bn_beta_;
    core::BatchNormState* bn_state_;
    TemporalConv conv1_, conv2_;
    Linear translation_;
    Linear classifier_;
};

/// Concatenates per-stream features on the channel axis and projects them
/// back to the encoder width.
class FuseProjection {
public:
    FuseProjection(ParameterStore& store, const std::string& name, std::size_t streams, std::size_t channels,
                   Initializer& init);

    core::Value forward(const std::vector<core::Value>& stream_features) const;
    Linear& projection() { return projection_; }

private:
    std::size_t streams_, channels_;
    Linear projection_;
};

}  // namespace mska::model
