#pragma once

#include <vector>

#include "mska/core/value.hpp"

namespace mska::core {

inline constexpr double kLeakySlope = 0.01;

// Batched matrix product [..., m, k] x [..., k, n]. Batch extents must be
// equal, or one operand may be a plain matrix that is broadcast.
Value matmul(const Value& a, const Value& b);

// Elementwise arithmetic. `b` may match `a` exactly or match a trailing
// suffix of a's shape, in which case it is broadcast over the leading axes.
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value scale(const Value& a, double s);

Value tanh(const Value& x);
Value relu(const Value& x);
Value leaky_relu(const Value& x, double slope = kLeakySlope);

Value softmax(const Value& x, int axis);
Value log_softmax(const Value& x, int axis);

/// Per-row KL(p || q) over `axis` given log-probabilities of both
/// distributions. The reduced axis is removed from the result shape.
Value kl_divergence(const Value& log_p, const Value& log_q, int axis = -1);

/// Affine map over the last axis: x[..., in] * w[in, out] + b[out].
/// `b` may be undefined.
Value linear(const Value& x, const Value& w, const Value& b);

/// Kernel-3 convolution along axis 1 of x[B, T, N, Cin] with zero padding 1.
/// w has shape [3, Cin, Cout]; output is [B, ceil(T / stride), N, Cout].
Value temporal_conv(const Value& x, const Value& w, const Value& b, std::size_t stride);

Value mean(const Value& x, int axis);
Value sum(const Value& x);
Value concat(const std::vector<Value>& parts, int axis);
Value reshape(const Value& x, Shape shape);
Value permute(const Value& x, const std::vector<std::size_t>& order);

/// Numeric copy that is cut off from the graph.
Value detach(const Value& x);

/// Running statistics for batch normalization over every axis but the last.
struct BatchNormState {
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double momentum = 0.9;
    double eps = 1e-5;

    explicit BatchNormState(std::size_t channels = 0)
        : running_mean(channels, 0.0), running_var(channels, 1.0) {}
};

/// Training mode normalizes with batch statistics (biased variance) and
/// folds them into `state`; evaluation mode uses the running statistics.
Value batch_norm(const Value& x, const Value& gamma, const Value& beta, BatchNormState& state,
                 bool training);

/// Throws NumericError if any element is NaN or infinite.
void require_finite(const Value& x, const char* what);

}  // namespace mska::core
