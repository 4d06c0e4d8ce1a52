#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mska/data/dataset.hpp"
#include "mska/train/config.hpp"
#include "mska/train/evaluate.hpp"

namespace mska::train {

inline constexpr const char* kLogFile = "train.log";
inline constexpr const char* kLastCheckpoint = "last.ckpt";
inline constexpr const char* kBestCheckpoint = "best.ckpt";

struct TrainOptions {
    std::filesystem::path out_dir;
    std::optional<std::filesystem::path> resume;
    /// Stop once this many epochs are complete (counting resumed ones).
    std::optional<int> stop_after;
    /// Human-readable progress with wall-clock timings; never part of the log.
    std::ostream* progress = nullptr;
    std::size_t threads = 1;
};

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double mean_loss = 0.0;
    std::size_t steps = 0;
    std::size_t skipped = 0;
    std::optional<EvalReport> dev;
    bool best = false;
};

struct TrainResult {
    std::vector<double> step_losses;  // this invocation only
    std::vector<EpochRecord> epochs;
    double best_dev_wer = 0.0;
    int best_epoch = -1;
};

/// Runs (or resumes) training. Per step: augment, batch, forward, loss,
/// backward, clip, Adam. Per epoch: cosine learning rate, dev evaluation,
/// last.ckpt and, on a new best dev ensemble WER, best.ckpt. Appends to
/// `out_dir/train.log`.
TrainResult train(const RunConfig& config, const data::Dataset& dataset, const TrainOptions& options);

}  // namespace mska::train
