#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "mska/core/ops.hpp"
#include "mska/core/value.hpp"

namespace mska::model {

/// Ordered registry of named trainable tensors and batch-norm statistics.
/// Registration order is the canonical order for optimizers and checkpoints.
class ParameterStore {
public:
    core::Value add(std::string name, core::Shape shape, std::vector<double> data);
    core::BatchNormState& add_batch_norm(std::string name, std::size_t channels);

    std::vector<core::Value>& values() { return values_; }
    const std::vector<core::Value>& values() const { return values_; }
    const std::vector<std::string>& names() const { return names_; }

    std::vector<core::BatchNormState*>& batch_norms() { return bn_ptrs_; }
    const std::vector<std::string>& batch_norm_names() const { return bn_names_; }

    std::size_t scalar_count() const;
    void zero_grad();

    ParameterStore() = default;
    ParameterStore(const ParameterStore&) = delete;
    ParameterStore& operator=(const ParameterStore&) = delete;

private:
    std::vector<std::string> names_;
    std::vector<core::Value> values_;
    std::vector<std::string> bn_names_;
    std::vector<std::unique_ptr<core::BatchNormState>> bn_states_;
    std::vector<core::BatchNormState*> bn_ptrs_;
};

/// Fan-in uniform initialization, U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
class Initializer {
public:
    explicit Initializer(std::uint64_t seed) : rng_(seed) {}
    std::vector<double> uniform(std::size_t count, std::size_t fan_in);

private:
    std::mt19937_64 rng_;
};

/// Affine map over the last axis with its own weight and bias.
struct Linear {
    core::Value weight;  // [in, out]
    core::Value bias;    // [out]

    Linear() = default;
    Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Initializer& init);
    core::Value operator()(const core::Value& x) const { return core::linear(x, weight, bias); }
};

/// Kernel-3 temporal convolution.
struct TemporalConv {
    core::Value weight;  // [3, in, out]
    core::Value bias;
    std::size_t stride = 1;

    TemporalConv() = default;
    TemporalConv(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                 std::size_t stride, Initializer& init);
    core::Value operator()(const core::Value& x) const {
        return core::temporal_conv(x, weight, bias, stride);
    }
};

}  // namespace mska::model
