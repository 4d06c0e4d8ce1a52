#include "mska/model/encoder.hpp"

#include <Eigen/Core>
#include <cmath>
#include <memory>

#include "mska/core/ops.hpp"
#include "mska/errors.hpp"

namespace mska::model {

using core::Value;

namespace {

using Index = Eigen::Index;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Mat = Eigen::Map<RowMatrix>;
using ConstMat = Eigen::Map<const RowMatrix>;
using Row = Eigen::Map<Eigen::RowVectorXd>;
using ConstRow = Eigen::Map<const Eigen::RowVectorXd>;

}  // namespace

std::size_t EncoderConfig::embed_for(std::size_t block) const {
    if (embed_channels != 0) return embed_channels;
    return std::max<std::size_t>(8, channels.at(block) / 4);
}

std::size_t EncoderConfig::downsampling() const {
    std::size_t p = 1;
    for (auto s : strides) p *= s;
    return p;
}

void EncoderConfig::validate() const {
    if (channels.empty()) throw ContractError("encoder: at least one block required");
    if (strides.size() != channels.size()) {
        throw ContractError("encoder: " + std::to_string(channels.size()) + " channel entries but " +
                            std::to_string(strides.size()) + " strides");
    }
    for (auto s : strides) {
        if (s == 0) throw ContractError("encoder: strides must be positive");
    }
    if (downsampling() != 4) throw ContractError("encoder: strides must multiply to 4");
    for (auto c : channels) {
        if (c == 0) throw ContractError("encoder: channel counts must be positive");
    }
    if (heads == 0) throw ContractError("encoder: need at least one attention head");
    if (in_channels == 0) throw ContractError("encoder: input channels must be positive");
}

std::vector<double> positional_encoding(std::size_t joints, std::size_t channels) {
    std::vector<double> pe(joints * channels);
    for (std::size_t p = 0; p < joints; ++p) {
        for (std::size_t d = 0; d < channels; ++d) {
            const double i2 = static_cast<double>(d - d % 2);
            const double angle = static_cast<double>(p) / std::pow(10000.0, i2 / static_cast<double>(channels));
            pe[p * channels + d] = d % 2 == 0 ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

AttentionHeadResult attention_head(const Value& x, const AttentionHeadParams& params,
                                   bool global_regularization) {
    if (x.rank() != 4) throw DimensionError("attention_head: expected [B,T,N,C], got " + core::to_string(x.shape()));
    core::require_finite(x, "attention_head");
    const std::size_t batch = x.dim(0), frames = x.dim(1), joints = x.dim(2), channels = x.dim(3);
    const std::size_t embed = params.query_weight.dim(1);
    if (params.query_weight.dim(0) != channels || params.key_weight.dim(0) != channels ||
        params.key_weight.dim(1) != embed || params.query_bias.size() != embed || params.key_bias.size() != embed) {
        throw DimensionError("attention_head: projection shapes do not match input " + core::to_string(x.shape()));
    }
    if (global_regularization && (params.global_attention.rank() != 2 || params.global_attention.dim(0) != joints ||
                                  params.global_attention.dim(1) != joints)) {
        throw DimensionError("attention_head: global attention is " +
                             core::to_string(params.global_attention.shape()) + " but input has " +
                             std::to_string(joints) + " joints");
    }

    // Fused kernel; the unfused composition is kept in the tests as an oracle.
    const std::size_t rows = batch * frames * joints;
    const double norm = 1.0 / (std::sqrt(static_cast<double>(embed)) * static_cast<double>(frames));
    const Index N = static_cast<Index>(joints), C = static_cast<Index>(channels), E = static_cast<Index>(embed);
    const auto& xd = x.node().data;

    auto q = std::make_shared<std::vector<double>>(rows * embed);
    auto k = std::make_shared<std::vector<double>>(rows * embed);
    {
        const ConstMat xm(xd.data(), static_cast<Index>(rows), C);
        Mat qm(q->data(), static_cast<Index>(rows), E);
        Mat km(k->data(), static_cast<Index>(rows), E);
        qm.noalias() = xm * ConstMat(params.query_weight.node().data.data(), C, E);
        qm.rowwise() += ConstRow(params.query_bias.node().data.data(), E);
        km.noalias() = xm * ConstMat(params.key_weight.node().data.data(), C, E);
        km.rowwise() += ConstRow(params.key_bias.node().data.data(), E);
    }

    auto dyn = std::make_shared<std::vector<double>>(batch * joints * joints, 0.0);
    auto att = std::make_shared<std::vector<double>>(batch * joints * joints);
    std::vector<double> out(rows * channels);
    for (std::size_t b = 0; b < batch; ++b) {
        Mat s(dyn->data() + b * joints * joints, N, N);
        for (std::size_t t = 0; t < frames; ++t) {
            const std::size_t off = (b * frames + t) * joints * embed;
            s.noalias() += ConstMat(q->data() + off, N, E) * ConstMat(k->data() + off, N, E).transpose();
        }
        s = (s * norm).array().tanh().matrix();
        Mat a(att->data() + b * joints * joints, N, N);
        a = s;
        if (global_regularization) a += ConstMat(params.global_attention.node().data.data(), N, N);
        for (std::size_t t = 0; t < frames; ++t) {
            const std::size_t off = (b * frames + t) * joints * channels;
            Mat(out.data() + off, N, C).noalias() = a * ConstMat(xd.data() + off, N, C);
        }
    }
    for (double v : *dyn) {
        if (!std::isfinite(v)) throw NumericError("attention_head: non-finite attention scores");
    }

    std::vector<Value> inputs{x, params.query_weight, params.query_bias, params.key_weight, params.key_bias};
    if (global_regularization) inputs.push_back(params.global_attention);
    Value output = Value::from_op(
        "attention_head", x.shape(), std::move(out), std::move(inputs),
        [=](core::Node& self) {
            core::Node& nx = *self.inputs[0];
            core::Node& nwq = *self.inputs[1];
            core::Node& nbq = *self.inputs[2];
            core::Node& nwk = *self.inputs[3];
            core::Node& nbk = *self.inputs[4];
            core::Node* nag = global_regularization ? self.inputs[5].get() : nullptr;

            std::vector<double> dq(rows * embed, 0.0), dk(rows * embed, 0.0);
            RowMatrix da(N, N), ds(N, N);
            for (std::size_t b = 0; b < batch; ++b) {
                const ConstMat a(att->data() + b * joints * joints, N, N);
                const ConstMat d(dyn->data() + b * joints * joints, N, N);
                da.setZero();
                for (std::size_t t = 0; t < frames; ++t) {
                    const std::size_t off = (b * frames + t) * joints * channels;
                    const ConstMat g(self.grad.data() + off, N, C);
                    da.noalias() += g * ConstMat(nx.data.data() + off, N, C).transpose();
                    if (nx.requires_grad) Mat(nx.grad.data() + off, N, C).noalias() += a.transpose() * g;
                }
                if (nag && nag->requires_grad) Mat(nag->grad.data(), N, N) += da;
                ds = (da.array() * (1.0 - d.array().square()) * norm).matrix();
                for (std::size_t t = 0; t < frames; ++t) {
                    const std::size_t off = (b * frames + t) * joints * embed;
                    Mat(dq.data() + off, N, E).noalias() += ds * ConstMat(k->data() + off, N, E);
                    Mat(dk.data() + off, N, E).noalias() += ds.transpose() * ConstMat(q->data() + off, N, E);
                }
            }
            const ConstMat xm(nx.data.data(), static_cast<Index>(rows), C);
            auto project = [&](const std::vector<double>& dp, core::Node& w, core::Node& bias) {
                const ConstMat g(dp.data(), static_cast<Index>(rows), E);
                if (w.requires_grad) Mat(w.grad.data(), C, E).noalias() += xm.transpose() * g;
                if (bias.requires_grad) Row(bias.grad.data(), E) += g.colwise().sum();
                if (nx.requires_grad) {
                    Mat(nx.grad.data(), static_cast<Index>(rows), C).noalias() +=
                        g * ConstMat(w.data.data(), C, E).transpose();
                }
            };
            project(dq, nwq, nbq);
            project(dk, nwk, nbk);
        });
    return {output, Value::constant({batch, joints, joints}, *att), Value::constant({batch, joints, joints}, *dyn)};
}

AttentionBlock::AttentionBlock(ParameterStore& store, const std::string& name, std::size_t joints,
                               std::size_t in_channels, std::size_t out_channels, std::size_t heads,
                               std::size_t embed, std::size_t stride, Initializer& init)
    : joints_(joints), in_channels_(in_channels), out_channels_(out_channels) {
    for (std::size_t h = 0; h < heads; ++h) {
        const std::string hn = name + ".head" + std::to_string(h);
        AttentionHeadParams p;
        p.query_weight = store.add(hn + ".query.weight", {in_channels, embed},
                                   init.uniform(in_channels * embed, in_channels));
        p.query_bias = store.add(hn + ".query.bias", {embed}, init.uniform(embed, in_channels));
        p.key_weight = store.add(hn + ".key.weight", {in_channels, embed},
                                 init.uniform(in_channels * embed, in_channels));
        p.key_bias = store.add(hn + ".key.bias", {embed}, init.uniform(embed, in_channels));
        std::vector<double> eye(joints * joints, 0.0);
        for (std::size_t i = 0; i < joints; ++i) eye[i * joints + i] = 1.0;
        p.global_attention = store.add(hn + ".global_attention", {joints, joints}, std::move(eye));
        heads_.push_back(std::move(p));
    }
    positional_ = Value::constant({joints, in_channels}, positional_encoding(joints, in_channels));
    out1_ = Linear(store, name + ".out1", heads * in_channels, out_channels, init);
    out2_ = Linear(store, name + ".out2", out_channels, out_channels, init);
    if (in_channels != out_channels) {
        residual1_ = Linear(store, name + ".residual1", in_channels, out_channels, init);
        residual2_ = Linear(store, name + ".residual2", in_channels, out_channels, init);
    }
    feedforward_ = Linear(store, name + ".feedforward", out_channels, out_channels, init);
    temporal_ = TemporalConv(store, name + ".temporal", out_channels, out_channels, stride, init);
}

Value AttentionBlock::forward(const Value& x, bool global_regularization) const {
    if (x.rank() != 4 || x.dim(2) != joints_ || x.dim(3) != in_channels_) {
        throw DimensionError("attention block expects [B,T," + std::to_string(joints_) + "," +
                             std::to_string(in_channels_) + "], got " + core::to_string(x.shape()));
    }
    const Value enriched = core::add(x, positional_);
    std::vector<Value> outputs;
    outputs.reserve(heads_.size());
    for (const auto& head : heads_) {
        outputs.push_back(attention_head(enriched, head, global_regularization).output);
    }
    const Value merged = outputs.size() == 1 ? outputs.front() : core::concat(outputs, 3);

    const bool project = in_channels_ != out_channels_;
    Value z = out2_(core::leaky_relu(out1_(merged)));
    const Value u = core::leaky_relu(core::add(z, project ? residual1_(x) : x));
    const Value v = core::leaky_relu(core::add(feedforward_(u), project ? residual2_(x) : x));
    return core::leaky_relu(temporal_(v));
}

StreamEncoder::StreamEncoder(ParameterStore& store, const std::string& name, std::size_t joints,
                             const EncoderConfig& config, Initializer& init)
    : joints_(joints), config_(config) {
    config_.validate();
    std::size_t in = config_.in_channels;
    for (std::size_t b = 0; b < config_.blocks(); ++b) {
        const std::size_t out = config_.channels[b];
        blocks_.emplace_back(store, name + ".block" + std::to_string(b), joints, in, out, config_.heads,
                             config_.embed_for(b), config_.strides[b], init);
        in = out;
    }
}

Value StreamEncoder::forward_blocks(const Value& x) const {
    if (x.rank() != 4 || x.dim(1) == 0) throw InputError("stream encoder: empty input");
    Value h = x;
    for (const auto& block : blocks_) h = block.forward(h, config_.global_regularization);
    return h;
}

Value StreamEncoder::forward(const Value& x) const { return core::mean(forward_blocks(x), 2); }

}  // namespace mska::model
