#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mska/augment.hpp"
#include "mska/model/mska.hpp"

namespace mska::train {

/// Everything that determines a run. Parsed from `key = value` lines with
/// dotted keys; `preset = paper|desk` selects the base values and may appear
/// anywhere in the file.
struct RunConfig {
    model::ArchitectureConfig arch;
    std::string vocabulary = "vocab.txt";  // relative to the data directory
    double distill_weight = 1.0;

    double lr = 1e-3;
    double weight_decay = 1e-3;
    std::size_t batch_size = 8;
    int epochs = 100;
    double clip_norm = 5.0;  // 0 disables clipping

    augment::AugmentConfig augment;
    std::uint64_t seed = 1;

    std::size_t beam_width = 5;
    std::vector<std::string> ensemble{"left", "right", "face", "body", "fuse"};

    std::string train_split = "train";
    std::string dev_split = "dev";

    static RunConfig paper();
    /// Two blocks, two heads, channels 32 and 64, narrow heads. Batches of 10
    /// and a larger step size than the full configuration.
    static RunConfig desk();

    static RunConfig parse(std::string_view text, const std::string& source = "<config>");
    static RunConfig load(const std::filesystem::path& path);

    /// Every key in a fixed order; parse(canonical()) reproduces the config.
    std::string canonical() const;
    std::uint64_t fingerprint() const;

    /// Throws ConfigError.
    void validate() const;
};

/// Stride list for a channel list: stride 2 where the width grows (at most
/// two places), then on the earliest remaining blocks until the product is 4.
std::vector<std::size_t> default_strides(const std::vector<std::size_t>& channels);

/// Channel list for `blocks` blocks following 64, 64, 128, 128, 256, ...
std::vector<std::size_t> default_channels(std::size_t blocks);

}  // namespace mska::train
