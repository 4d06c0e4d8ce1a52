#pragma once

#include <cstdint>
#include <vector>

#include "mska/core/value.hpp"

namespace mska::core {

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-3;
};

/// Adam with decoupled weight decay. Moments are kept per parameter in the
/// order the parameters were registered.
class Adam {
public:
    explicit Adam(AdamOptions options = {}) : options_(options) {}

    /// Shrinks each parameter by lr * weight_decay, then applies the
    /// bias-corrected Adam update computed from its current gradient.
    void step(std::vector<Value>& params);

    AdamOptions& options() { return options_; }
    const AdamOptions& options() const { return options_; }
    std::uint64_t steps() const { return steps_; }

    // Exposed for checkpointing.
    std::vector<std::vector<double>>& first_moments() { return m_; }
    std::vector<std::vector<double>>& second_moments() { return v_; }
    void set_steps(std::uint64_t s) { steps_ = s; }

private:
    AdamOptions options_;
    std::uint64_t steps_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

/// base_lr * (1 + cos(pi * epoch / total)) / 2
double cosine_lr(int epoch, int total, double base_lr);

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(std::vector<Value>& params, double max_norm);

}  // namespace mska::core
