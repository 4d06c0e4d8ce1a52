#include "mska/core/optim.hpp"

#include <cmath>
#include <numbers>

#include "mska/errors.hpp"

namespace mska::core {

void Adam::step(std::vector<Value>& params) {
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(p.size(), 0.0);
            v_.emplace_back(p.size(), 0.0);
        }
    }
    if (m_.size() != params.size()) {
        throw DimensionError("adam: optimizer tracks " + std::to_string(m_.size()) +
                             " parameters, got " + std::to_string(params.size()));
    }
    ++steps_;
    const double t = static_cast<double>(steps_);
    const double bc1 = 1.0 - std::pow(options_.beta1, t);
    const double bc2 = 1.0 - std::pow(options_.beta2, t);
    const double decay = 1.0 - options_.lr * options_.weight_decay;

    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = params[k];
        if (m_[k].size() != p.size() || p.grad().size() != p.size()) {
            throw DimensionError("adam: moment/gradient shape mismatch for parameter " + std::to_string(k));
        }
        auto data = p.mutable_data();
        auto grad = p.grad();
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double g = grad[i];
            data[i] *= decay;
            m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g;
            v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            data[i] -= options_.lr * mhat / (std::sqrt(vhat) + options_.eps);
        }
    }
}

double cosine_lr(int epoch, int total, double base_lr) {
    if (total <= 0) throw ContractError("cosine_lr: total epochs must be positive");
    if (epoch < 0 || epoch > total) throw ContractError("cosine_lr: epoch outside [0, total]");
    return base_lr * (1.0 + std::cos(std::numbers::pi * epoch / total)) / 2.0;
}

double clip_grad_norm(std::vector<Value>& params, double max_norm) {
    double sq = 0.0;
    for (const auto& p : params)
        for (double g : p.grad()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) throw NumericError("gradient norm is not finite");
    if (norm > max_norm && norm > 0.0) {
        const double s = max_norm / norm;
        for (auto& p : params)
            for (double& g : p.mutable_grad()) g *= s;
    }
    return norm;
}

}  // namespace mska::core
