#include "mska/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mska/errors.hpp"

namespace mska::augment {

using data::KeypointSequence;

void AugmentConfig::validate() const {
    if (!(temporal_min >= 0.5 && temporal_max <= 1.5 && temporal_min <= temporal_max)) {
        throw InputError("augment: temporal range must lie within [0.5, 1.5]");
    }
    if (!(rotate_max >= 0.0)) throw InputError("augment: rotate range must be non-negative");
    if (!(scale_min > 0.0 && scale_min <= scale_max)) throw InputError("augment: invalid scale range");
    if (!(translate_max >= 0.0)) throw InputError("augment: translate range must be non-negative");
}

std::vector<std::size_t> resample_indices(std::size_t frames, double factor, Rng& rng) {
    if (!(factor >= 0.5 && factor <= 1.5)) throw InputError("temporal_resample: factor outside [0.5, 1.5]");
    if (frames < 2) throw InputError("temporal_resample: need at least 2 frames");
    const auto target =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(frames) * factor)));

    std::vector<std::size_t> idx(frames);
    std::iota(idx.begin(), idx.end(), 0);
    if (target <= frames) {
        // Partial Fisher-Yates: the first `target` slots become a uniform subset.
        for (std::size_t i = 0; i < target; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, frames - 1);
            std::swap(idx[i], idx[pick(rng)]);
        }
        idx.resize(target);
    } else {
        std::uniform_int_distribution<std::size_t> pick(0, frames - 1);
        for (std::size_t i = frames; i < target; ++i) idx.push_back(pick(rng));
    }
    std::sort(idx.begin(), idx.end());
    return idx;
}

KeypointSequence temporal_resample(const KeypointSequence& seq, double factor, Rng& rng) {
    if (!seq.normalized()) throw ContractError("temporal_resample: sequence must be normalized");
    return seq.select_frames(resample_indices(seq.frames(), factor, rng));
}

KeypointSequence rotate(const KeypointSequence& seq, double theta) {
    if (!seq.normalized()) throw ContractError("rotate: sequence must be normalized");
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    KeypointSequence out = seq;
    for (std::size_t t = 0; t < seq.frames(); ++t) {
        for (std::size_t n = 0; n < seq.joints(); ++n) {
            const double x = seq.x(t, n);
            const double y = seq.y(t, n);
            out.x(t, n) = c * x - s * y;
            out.y(t, n) = s * x + c * y;
        }
    }
    return out;
}

KeypointSequence scale(const KeypointSequence& seq, double factor) {
    if (!seq.normalized()) throw ContractError("scale: sequence must be normalized");
    if (!(factor > 0.0)) throw InputError("scale: factor must be positive");
    KeypointSequence out = seq;
    for (std::size_t t = 0; t < seq.frames(); ++t) {
        for (std::size_t n = 0; n < seq.joints(); ++n) {
            out.x(t, n) *= factor;
            out.y(t, n) *= factor;
        }
    }
    return out;
}

KeypointSequence translate(const KeypointSequence& seq, std::array<double, 2> offset) {
    if (!seq.normalized()) throw ContractError("translate: sequence must be normalized");
    KeypointSequence out = seq;
    for (std::size_t t = 0; t < seq.frames(); ++t) {
        for (std::size_t n = 0; n < seq.joints(); ++n) {
            out.x(t, n) += offset[0];
            out.y(t, n) += offset[1];
        }
    }
    return out;
}

KeypointSequence augment_pipeline(const KeypointSequence& seq, const AugmentConfig& config, Rng& rng) {
    if (!seq.normalized()) throw ContractError("augment_pipeline: sequence must be normalized");
    config.validate();
    KeypointSequence out = seq;
    if (config.temporal && out.frames() >= 2) {
        std::uniform_real_distribution<double> f(config.temporal_min, config.temporal_max);
        out = temporal_resample(out, f(rng), rng);
    }
    if (config.rotate) {
        std::uniform_real_distribution<double> a(-config.rotate_max, config.rotate_max);
        out = rotate(out, a(rng));
    }
    if (config.scale) {
        std::uniform_real_distribution<double> s(config.scale_min, config.scale_max);
        out = scale(out, s(rng));
    }
    if (config.translate) {
        std::uniform_real_distribution<double> v(-config.translate_max, config.translate_max);
        const double dx = v(rng);
        const double dy = v(rng);
        out = translate(out, {dx, dy});
    }
    return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

Rng sample_rng(std::uint64_t seed, std::uint64_t epoch, std::uint64_t sample) {
    return Rng(splitmix64(splitmix64(splitmix64(seed) ^ epoch) ^ sample));
}

}  // namespace mska::augment
