#include "mska/model/heads.hpp"

#include "mska/errors.hpp"

namespace mska::model {

using core::Value;

HeadNetwork::HeadNetwork(ParameterStore& store, const std::string& name, std::size_t in_channels,
                         std::size_t width, std::size_t classes, Initializer& init)
    : in_channels_(in_channels),
      width_(width),
      classes_(classes),
      temporal_linear_(store, name + ".temporal_linear", in_channels, width, init),
      bn_gamma_(store.add(name + ".bn.gamma", {width}, std::vector<double>(width, 1.0))),
      bn_beta_(store.add(name + ".bn.beta", {width}, std::vector<double>(width, 0.0))),
      bn_state_(&store.add_batch_norm(name + ".bn", width)),
      conv1_(store, name + ".conv1", width, width, 1, init),
      conv2_(store, name + ".conv2", width, width, 1, init),
      translation_(store, name + ".translation", width, width, init),
      classifier_(store, name + ".classifier", width, classes, init) {}

HeadOutput HeadNetwork::forward(const Value& x, bool training) const {
    if (x.rank() != 3 || x.dim(2) != in_channels_) {
        throw DimensionError("head expects [B,T'," + std::to_string(in_channels_) + "], got " +
                             core::to_string(x.shape()));
    }
    const std::size_t batch = x.dim(0), frames = x.dim(1);
    Value h = temporal_linear_(x);
    h = core::relu(core::batch_norm(h, bn_gamma_, bn_beta_, *bn_state_, training));
    h = core::reshape(h, {batch, frames, 1, width_});
    h = conv2_(core::relu(conv1_(h)));
    h = core::reshape(h, {batch, frames, width_});
    Value repr = core::relu(translation_(h));
    Value log_probs = core::log_softmax(classifier_(repr), -1);
    return {std::move(repr), std::move(log_probs)};
}

FuseProjection::FuseProjection(ParameterStore& store, const std::string& name, std::size_t streams,
                               std::size_t channels, Initializer& init)
    : streams_(streams), channels_(channels), projection_(store, name, streams * channels, channels, init) {}

Value FuseProjection::forward(const std::vector<Value>& stream_features) const {
    if (stream_features.size() != streams_) {
        throw DimensionError("fuse: expected " + std::to_string(streams_) + " streams, got " +
                             std::to_string(stream_features.size()));
    }
    for (const auto& f : stream_features) {
        if (f.shape() != stream_features.front().shape()) {
            throw DimensionError("fuse: stream features " + core::to_string(f.shape()) + " and " +
                                 core::to_string(stream_features.front().shape()) + " differ");
        }
    }
    return projection_(core::concat(stream_features, -1));
}

}  // namespace mska::model
