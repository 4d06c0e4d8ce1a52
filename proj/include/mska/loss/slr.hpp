#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mska/core/value.hpp"
#include "mska/data/dataset.hpp"
#include "mska/model/mska.hpp"

namespace mska::loss {

struct DistillationResult {
    core::Value loss;                   // scalar
    std::vector<double> teacher_log;    // teacher log-probabilities, same layout as each head
};

/// Frame-level self-distillation. The teacher is the per-frame mean of the
/// head distributions and carries no gradient; the loss is, per sample, the
/// mean over valid frames of sum_k KL(teacher || head_k), then averaged over
/// samples. Heads are [B, T', C] (or [T', C]) log-probabilities. An explicit
/// `teacher_log` replaces the computed teacher.
DistillationResult distillation_loss(const std::vector<core::Value>& head_log_probs,
                                     const std::vector<std::size_t>& lengths = {},
                                     const std::vector<double>* teacher_log = nullptr);

/// Components of the recognition objective for one batch. CTC terms are
/// absent for heads the model does not have.
struct LossReport {
    std::optional<double> ctc_left, ctc_right, ctc_body, ctc_fuse;
    double distill = 0.0;
    double lambda = 1.0;
    double total = 0.0;

    double ctc_sum() const;
    /// ctc_left + ctc_right + ctc_body + ctc_fuse + lambda * distill,
    /// summed in exactly that order.
    double resum() const;
    std::string to_log_fields() const;
};

struct SlrLoss {
    core::Value total;
    LossReport report;
    std::vector<double> teacher_log;
};

/// CTC on the left, right, body and fuse heads (face is supervised only via
/// distillation) plus lambda times distillation across the stream heads.
/// CTC terms are batch means.
SlrLoss slr_loss(const model::ModelOutput& output, const std::vector<std::vector<data::GlossId>>& targets,
                 data::GlossId blank, double lambda, const std::vector<double>* teacher_log = nullptr);

}  // namespace mska::loss
