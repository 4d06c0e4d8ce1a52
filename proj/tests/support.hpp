#pragma once

// Shared helpers for the test binaries: random tensors and a central
// finite-difference gradient checker.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "mska/core/ops.hpp"
#include "mska/core/value.hpp"

namespace testing {

using mska::core::Shape;
using mska::core::Value;

inline std::vector<double> uniform(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

inline Value random_param(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    return Value::parameter(shape, uniform(mska::core::numel(shape), rng, lo, hi));
}

inline Value random_const(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    return Value::constant(shape, uniform(mska::core::numel(shape), rng, lo, hi));
}

/// Contracts `y` with fixed random weights so every output entry carries a
/// distinct gradient.
inline Value probe(const Value& y, std::uint64_t seed = 99) {
    std::mt19937_64 rng(seed);
    return mska::core::sum(mska::core::mul(y, random_const(y.shape(), rng)));
}

/// |a - n| / max(|a|, |n|, floor)
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Maximum relative error between backward() and central differences with
/// step h over every entry of every listed parameter. `loss` must rebuild
/// the graph from the parameters' current data on every call. `floor` keeps
/// entries below the difference quotient's roundoff from dominating.
inline double gradient_check(const std::function<Value()>& loss, std::vector<Value> params, double h = 1e-5,
                             double floor = 1e-6) {
    for (auto& p : params) p.zero_grad();
    mska::core::backward(loss());
    std::vector<std::vector<double>> analytic;
    for (auto& p : params) analytic.emplace_back(p.grad().begin(), p.grad().end());

    double worst = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto data = params[k].mutable_data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double saved = data[i];
            data[i] = saved + h;
            const double up = loss().item();
            data[i] = saved - h;
            const double down = loss().item();
            data[i] = saved;
            worst = std::max(worst, relative_error(analytic[k][i], (up - down) / (2.0 * h), floor));
        }
    }
    return worst;
}

}  // namespace testing
