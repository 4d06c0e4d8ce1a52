#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mska/core/value.hpp"
#include "mska/data/dataset.hpp"

namespace mska::loss {

using data::GlossId;

/// Frames needed to emit `target`: one per label plus one blank between each
/// pair of equal neighbours.
std::size_t ctc_min_frames(std::span<const GlossId> target);

struct CtcResult {
    double loss = 0.0;          // -log p(target | inputs)
    std::vector<double> grad;   // d loss / d log_probs, [frames x classes]
};

/// Log-space forward-backward over the blank-extended target. `log_probs`
/// is a row-major [frames x classes] block of per-frame log-probabilities.
/// Throws InfeasibleError if the target cannot fit, NumericError if every
/// alignment has zero probability.
CtcResult ctc_forward_backward(std::span<const double> log_probs, std::size_t frames, std::size_t classes,
                               std::span<const GlossId> target, GlossId blank);

/// Scalar CTC loss on a [T', V+1] log-probability tensor.
core::Value ctc_loss(const core::Value& log_probs, const std::vector<GlossId>& target, GlossId blank);

/// Per-sample CTC losses, [B], on [B, T', V+1] using only the first
/// lengths[b] frames of sample b.
core::Value ctc_loss_batch(const core::Value& log_probs, const std::vector<std::size_t>& lengths,
                           const std::vector<std::vector<GlossId>>& targets, GlossId blank);

}  // namespace mska::loss
