#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "mska/core/optim.hpp"
#include "mska/model/mska.hpp"
#include "mska/train/config.hpp"

namespace mska::train {

/// Loop position saved with a checkpoint. Per-sample randomness is derived
/// from (seed, epoch, sample), so the seed in the config plus the epoch
/// counter fully determine the remaining random streams.
struct TrainingState {
    std::uint64_t next_epoch = 0;
    std::uint64_t global_step = 0;
    double best_dev_wer = 0.0;
    std::int64_t best_epoch = -1;  // -1: no dev evaluation yet
};

/// Binary little-endian layout: magic, format version, config fingerprint,
/// config text, vocabulary, training state, optimizer state, then every
/// parameter (name, shape, values, both moments) and every batch-norm
/// buffer in registration order.
void save_checkpoint(const std::filesystem::path& path, const RunConfig& config,
                     const std::vector<std::string>& vocabulary, model::MskaModel& model,
                     core::Adam& optimizer, const TrainingState& state);

struct Checkpoint {
    RunConfig config;
    std::vector<std::string> vocabulary;
    TrainingState state;
    std::unique_ptr<model::MskaModel> model;
    core::Adam optimizer;
};

/// Rebuilds the model from the stored config and restores every buffer.
/// Throws InputError on a malformed file and ConfigError if the stored
/// fingerprint does not match the stored config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// As above, and additionally refuses a checkpoint produced by a different
/// configuration.
Checkpoint load_checkpoint(const std::filesystem::path& path, const RunConfig& expected);

}  // namespace mska::train
