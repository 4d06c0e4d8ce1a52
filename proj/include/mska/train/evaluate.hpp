#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mska/data/dataset.hpp"
#include "mska/decode.hpp"
#include "mska/model/mska.hpp"
#include "mska/train/config.hpp"

namespace mska::train {

/// Report columns: the four stream heads, the fuse head and the ensemble.
inline constexpr std::size_t kColumns = 6;
inline constexpr std::size_t kEnsembleColumn = 5;
inline constexpr std::array<const char*, kColumns> kColumnNames{"left", "right", "face", "body", "fuse", "ensemble"};

struct SampleResult {
    std::string id;
    std::vector<data::GlossId> reference;
    /// Best hypothesis per column; empty optionals for heads the model lacks.
    std::array<std::optional<std::vector<data::GlossId>>, kColumns> hypotheses;
    double ensemble_score = 0.0;
};

struct EvalReport {
    std::string split;
    std::size_t samples = 0;
    std::array<std::optional<decode::EditCounts>, kColumns> columns;

    double wer(std::size_t column) const;
    /// One `key=value` line per field: split, samples, then wer/sub/ins/del
    /// per column ("na" for absent heads).
    std::string to_text() const;
    /// ` dev_wer_left=... dev_wer_ensemble=...` style fields.
    std::string to_log_fields(const std::string& prefix) const;
};

/// Eval-mode inference: batch norm uses running statistics and no graph is
/// recorded, so samples can be processed concurrently.
class Evaluator {
public:
    Evaluator(const model::MskaModel& model, const RunConfig& config);

    model::ModelOutput forward(const data::Sample& sample) const;
    SampleResult run(const data::Sample& sample) const;
    std::vector<SampleResult> run_all(const std::vector<const data::Sample*>& samples, std::size_t threads) const;
    EvalReport report(const std::vector<SampleResult>& results, const std::string& split) const;

    /// Gloss representation of the fuse head (or the only stream head), [T', width].
    decode::FrameMatrix representation(const data::Sample& sample) const;

    /// Heads averaged by the ensemble column, in column order.
    const std::vector<std::size_t>& ensemble_members() const { return members_; }

private:
    const model::MskaModel& model_;
    const RunConfig& config_;
    std::vector<std::size_t> members_;
};

/// Worker threads for evaluation: MSKA_THREADS if set and positive, else 1.
std::size_t worker_threads();

}  // namespace mska::train
