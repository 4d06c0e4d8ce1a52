#include "mska/loss/slr.hpp"

#include <cmath>
#include <sstream>

#include "mska/core/ops.hpp"
#include "mska/errors.hpp"
#include "mska/loss/ctc.hpp"
#include "mska/text.hpp"

namespace mska::loss {

using core::Value;

DistillationResult distillation_loss(const std::vector<Value>& heads, const std::vector<std::size_t>& lengths,
                                     const std::vector<double>* teacher_log) {
    if (heads.empty()) throw ContractError("distillation: no heads");
    const auto& shape = heads.front().shape();
    if (shape.size() != 2 && shape.size() != 3) {
        throw DimensionError("distillation: expected [B,T',C] or [T',C], got " + core::to_string(shape));
    }
    for (const auto& h : heads) {
        if (h.shape() != shape) throw DimensionError("distillation: head shapes differ");
    }
    const std::size_t classes = shape.back();
    const std::size_t frames = shape[shape.size() - 2];
    const std::size_t batch = shape.size() == 3 ? shape[0] : 1;
    std::vector<std::size_t> valid = lengths;
    if (valid.empty()) valid.assign(batch, frames);
    if (valid.size() != batch) throw DimensionError("distillation: lengths do not match batch");

    const std::size_t rows = batch * frames;
    for (const auto& h : heads) {
        const auto d = h.data();
        for (std::size_t r = 0; r < rows; ++r) {
            double z = 0.0;
            for (std::size_t c = 0; c < classes; ++c) z += std::exp(d[r * classes + c]);
            if (!(std::abs(z - 1.0) < 1e-6)) {
                throw ContractError("distillation: head row " + std::to_string(r) + " is not a distribution");
            }
        }
    }

    DistillationResult result;
    if (teacher_log) {
        if (teacher_log->size() != rows * classes) throw DimensionError("distillation: teacher size mismatch");
        result.teacher_log = *teacher_log;
    } else {
        result.teacher_log.assign(rows * classes, 0.0);
        const double inv = 1.0 / static_cast<double>(heads.size());
        for (std::size_t i = 0; i < rows * classes; ++i) {
            double p = 0.0;
            for (const auto& h : heads) p += std::exp(h.data()[i]);
            result.teacher_log[i] = std::log(p * inv);
        }
    }
    const Value teacher = Value::constant(shape, result.teacher_log);

    std::vector<double> weights(rows, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
        if (valid[b] == 0 || valid[b] > frames) throw DimensionError("distillation: invalid length");
        for (std::size_t t = 0; t < valid[b]; ++t) {
            weights[b * frames + t] = 1.0 / (static_cast<double>(valid[b]) * static_cast<double>(batch));
        }
    }
    core::Shape row_shape(shape.begin(), shape.end() - 1);
    const Value w = Value::constant(row_shape, std::move(weights));

    Value total;
    for (const auto& h : heads) {
        const Value term = core::sum(core::mul(core::kl_divergence(teacher, h, -1), w));
        total = total.defined() ? core::add(total, term) : term;
    }
    result.loss = total;
    return result;
}

double LossReport::ctc_sum() const {
    double s = 0.0;
    for (const auto* v : {&ctc_left, &ctc_right, &ctc_body, &ctc_fuse}) {
        if (*v) s += **v;
    }
    return s;
}

double LossReport::resum() const { return ctc_sum() + lambda * distill; }

std::string LossReport::to_log_fields() const {
    std::ostringstream os;
    auto field = [&](const char* key, const std::optional<double>& v) {
        os << key << '=' << (v ? text::format_double(*v) : std::string("na")) << ' ';
    };
    field("ctc_left", ctc_left);
    field("ctc_right", ctc_right);
    field("ctc_body", ctc_body);
    field("ctc_fuse", ctc_fuse);
    os << "distill=" << text::format_double(distill) << " lambda=" << text::format_double(lambda)
       << " total=" << text::format_double(total);
    return os.str();
}

SlrLoss slr_loss(const model::ModelOutput& output, const std::vector<std::vector<data::GlossId>>& targets,
                 data::GlossId blank, double lambda, const std::vector<double>* teacher_log) {
    SlrLoss out;
    out.report.lambda = lambda;
    const double inv_batch = 1.0 / static_cast<double>(targets.size());

    // Accumulate in the fixed order left, right, body, fuse so that the graph
    // value and LossReport::resum() agree bit for bit.
    Value ctc_total;
    auto add_ctc = [&](const model::HeadOutput* head, std::optional<double>& slot) {
        if (!head) return;
        const Value term =
            core::scale(core::sum(ctc_loss_batch(head->log_probs, output.lengths, targets, blank)), inv_batch);
        slot = term.item();
        ctc_total = ctc_total.defined() ? core::add(ctc_total, term) : term;
    };
    add_ctc(output.head(data::Stream::Left), out.report.ctc_left);
    add_ctc(output.head(data::Stream::Right), out.report.ctc_right);
    add_ctc(output.head(data::Stream::Body), out.report.ctc_body);
    add_ctc(output.fuse ? &*output.fuse : nullptr, out.report.ctc_fuse);
    if (!ctc_total.defined()) throw ContractError("slr_loss: model has no CTC-supervised head");

    std::vector<Value> stream_heads;
    for (data::Stream s : data::kAllStreams) {
        if (const auto* h = output.head(s)) stream_heads.push_back(h->log_probs);
    }
    Value total = ctc_total;
    if (stream_heads.size() >= 2) {
        auto distill = distillation_loss(stream_heads, output.lengths, teacher_log);
        out.report.distill = distill.loss.item();
        out.teacher_log = std::move(distill.teacher_log);
        total = core::add(total, core::scale(distill.loss, lambda));
    }
    out.total = total;
    out.report.total = total.item();
    return out;
}

}  // namespace mska::loss
