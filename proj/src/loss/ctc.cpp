#include "mska/loss/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mska/errors.hpp"

namespace mska::loss {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace

std::size_t ctc_min_frames(std::span<const GlossId> target) {
    std::size_t n = target.size();
    for (std::size_t i = 1; i < target.size(); ++i) {
        if (target[i] == target[i - 1]) ++n;
    }
    return n;
}

CtcResult ctc_forward_backward(std::span<const double> log_probs, std::size_t frames, std::size_t classes,
                               std::span<const GlossId> target, GlossId blank) {
    if (target.empty()) throw ContractError("ctc: target must not be empty");
    if (frames == 0 || log_probs.size() < frames * classes) throw DimensionError("ctc: log-prob block too small");
    if (blank >= classes) throw ContractError("ctc: blank id outside class range");
    for (auto g : target) {
        if (g >= classes || g == blank) throw ContractError("ctc: target contains an invalid label");
    }
    for (std::size_t i = 0; i < frames * classes; ++i) {
        if (std::isnan(log_probs[i]) || log_probs[i] == std::numeric_limits<double>::infinity()) {
            throw NumericError("ctc: log-probabilities must not be NaN or +inf");
        }
    }
    const std::size_t needed = ctc_min_frames(target);
    if (needed > frames) {
        throw InfeasibleError("ctc: target of length " + std::to_string(target.size()) + " needs " +
                              std::to_string(needed) + " frames, only " + std::to_string(frames) + " available");
    }

    const std::size_t states = 2 * target.size() + 1;
    auto label = [&](std::size_t s) { return s % 2 == 0 ? blank : target[s / 2]; };
    auto lp = [&](std::size_t t, std::size_t c) { return log_probs[t * classes + c]; };
    // The skip transition s-2 -> s is allowed into a non-blank that differs
    // from the label two states back.
    auto can_skip = [&](std::size_t s) { return s >= 2 && s % 2 == 1 && label(s) != label(s - 2); };

    std::vector<double> alpha(frames * states, kNegInf);
    std::vector<double> beta(frames * states, kNegInf);
    alpha[0] = lp(0, blank);
    alpha[1] = lp(0, label(1));
    for (std::size_t t = 1; t < frames; ++t) {
        for (std::size_t s = 0; s < states; ++s) {
            double a = alpha[(t - 1) * states + s];
            if (s >= 1) a = log_add(a, alpha[(t - 1) * states + s - 1]);
            if (can_skip(s)) a = log_add(a, alpha[(t - 1) * states + s - 2]);
            alpha[t * states + s] = a == kNegInf ? kNegInf : a + lp(t, label(s));
        }
    }
    const std::size_t last = frames - 1;
    beta[last * states + states - 1] = lp(last, blank);
    beta[last * states + states - 2] = lp(last, label(states - 2));
    for (std::size_t t = last; t-- > 0;) {
        for (std::size_t s = 0; s < states; ++s) {
            double b = beta[(t + 1) * states + s];
            if (s + 1 < states) b = log_add(b, beta[(t + 1) * states + s + 1]);
            if (s + 2 < states && can_skip(s + 2)) b = log_add(b, beta[(t + 1) * states + s + 2]);
            beta[t * states + s] = b == kNegInf ? kNegInf : b + lp(t, label(s));
        }
    }

    const double log_total = log_add(alpha[last * states + states - 1], alpha[last * states + states - 2]);
    if (log_total == kNegInf) throw NumericError("ctc: every alignment has zero probability");

    CtcResult result;
    result.loss = -log_total;
    result.grad.assign(frames * classes, 0.0);
    for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t s = 0; s < states; ++s) {
            const double a = alpha[t * states + s];
            const double b = beta[t * states + s];
            if (a == kNegInf || b == kNegInf) continue;
            const std::size_t c = label(s);
            // alpha and beta both include the emission at t.
            result.grad[t * classes + c] -= std::exp(a + b - lp(t, c) - log_total);
        }
    }
    return result;
}

core::Value ctc_loss(const core::Value& log_probs, const std::vector<GlossId>& target, GlossId blank) {
    if (log_probs.rank() != 2) {
        throw DimensionError("ctc_loss: expected [T', V+1], got " + core::to_string(log_probs.shape()));
    }
    const std::size_t frames = log_probs.dim(0), classes = log_probs.dim(1);
    auto result = std::make_shared<CtcResult>(
        ctc_forward_backward(log_probs.data(), frames, classes, target, blank));
    return core::Value::from_op("ctc_loss", {1}, {result->loss}, {log_probs}, [result](core::Node& self) {
        auto& in = *self.inputs[0];
        const double g = self.grad[0];
        for (std::size_t i = 0; i < in.grad.size(); ++i) in.grad[i] += g * result->grad[i];
    });
}

core::Value ctc_loss_batch(const core::Value& log_probs, const std::vector<std::size_t>& lengths,
                           const std::vector<std::vector<GlossId>>& targets, GlossId blank) {
    if (log_probs.rank() != 3) {
        throw DimensionError("ctc_loss_batch: expected [B, T', V+1], got " + core::to_string(log_probs.shape()));
    }
    const std::size_t batch = log_probs.dim(0), frames = log_probs.dim(1), classes = log_probs.dim(2);
    if (lengths.size() != batch || targets.size() != batch) {
        throw DimensionError("ctc_loss_batch: lengths/targets do not match batch size");
    }
    auto results = std::make_shared<std::vector<CtcResult>>();
    std::vector<double> losses(batch);
    const auto data = log_probs.data();
    for (std::size_t b = 0; b < batch; ++b) {
        if (lengths[b] == 0 || lengths[b] > frames) throw DimensionError("ctc_loss_batch: invalid length");
        results->push_back(ctc_forward_backward(data.subspan(b * frames * classes, lengths[b] * classes),
                                                lengths[b], classes, targets[b], blank));
        losses[b] = results->back().loss;
    }
    return core::Value::from_op(
        "ctc_loss_batch", {batch}, std::move(losses), {log_probs}, [results, frames, classes](core::Node& self) {
            auto& in = *self.inputs[0];
            for (std::size_t b = 0; b < results->size(); ++b) {
                const auto& r = (*results)[b];
                double* dst = in.grad.data() + b * frames * classes;
                for (std::size_t i = 0; i < r.grad.size(); ++i) dst[i] += self.grad[b] * r.grad[i];
            }
        });
}

}  // namespace mska::loss
