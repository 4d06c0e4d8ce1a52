#include "mska/model/params.hpp"

#include <cmath>

#include "mska/errors.hpp"

namespace mska::model {

core::Value ParameterStore::add(std::string name, core::Shape shape, std::vector<double> data) {
    for (const auto& n : names_) {
        if (n == name) throw ContractError("duplicate parameter name " + name);
    }
    names_.push_back(std::move(name));
    values_.push_back(core::Value::parameter(std::move(shape), std::move(data)));
    return values_.back();
}

core::BatchNormState& ParameterStore::add_batch_norm(std::string name, std::size_t channels) {
    bn_names_.push_back(std::move(name));
    bn_states_.push_back(std::make_unique<core::BatchNormState>(channels));
    bn_ptrs_.push_back(bn_states_.back().get());
    return *bn_states_.back();
}

std::size_t ParameterStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
}

void ParameterStore::zero_grad() {
    for (auto& v : values_) v.zero_grad();
}

std::vector<double> Initializer::uniform(std::size_t count, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> out(count);
    for (auto& v : out) v = dist(rng_);
    return out;
}

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
               Initializer& init)
    : weight(store.add(name + ".weight", {in, out}, init.uniform(in * out, in))),
      bias(store.add(name + ".bias", {out}, init.uniform(out, in))) {}

TemporalConv::TemporalConv(ParameterStore& store, const std::string& name, std::size_t in,
                           std::size_t out, std::size_t stride_, Initializer& init)
    : weight(store.add(name + ".weight", {3, in, out}, init.uniform(3 * in * out, 3 * in))),
      bias(store.add(name + ".bias", {out}, init.uniform(out, 3 * in))),
      stride(stride_) {}

}  // namespace mska::model
