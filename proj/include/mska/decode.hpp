#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mska/data/dataset.hpp"

namespace mska::decode {

using data::GlossId;

/// Row-major [frames x classes] matrix of per-frame values.
struct FrameMatrix {
    std::size_t frames = 0;
    std::size_t classes = 0;
    std::vector<double> values;

    double at(std::size_t t, std::size_t c) const { return values[t * classes + c]; }
};

/// Per-frame arithmetic mean of probability matrices.
FrameMatrix ensemble(const std::vector<FrameMatrix>& probs);

FrameMatrix exp(const FrameMatrix& log_probs);
FrameMatrix log(const FrameMatrix& probs);

struct Hypothesis {
    std::vector<GlossId> glosses;  // blank-free, repeats collapsed
    double score = 0.0;            // log-probability of the labeling
};

/// CTC prefix beam search without a language model. Returns up to
/// `beam_width` hypotheses, best first, scored by their merged prefix
/// probability within the beam; equal scores are ordered by
/// lexicographically smaller gloss ids. Empty input yields one empty
/// hypothesis with score 0.
std::vector<Hypothesis> beam_decode(const FrameMatrix& log_probs, std::size_t beam_width, GlossId blank);

struct EditCounts {
    std::size_t substitutions = 0;
    std::size_t insertions = 0;
    std::size_t deletions = 0;
    std::size_t reference_length = 0;

    std::size_t errors() const { return substitutions + insertions + deletions; }
    EditCounts& operator+=(const EditCounts& o);
    /// 100 * errors / reference_length.
    double wer() const;
};

/// Minimum-edit alignment; among equal-cost alignments substitutions are
/// preferred over insertion/deletion pairs.
EditCounts edit_counts(const std::vector<std::string>& reference, const std::vector<std::string>& hypothesis);
EditCounts edit_counts(const std::vector<GlossId>& reference, const std::vector<GlossId>& hypothesis);

/// Sentence WER in percent. Throws ContractError on an empty reference.
double wer(const std::vector<std::string>& reference, const std::vector<std::string>& hypothesis);

/// Pools edit operations over all pairs before dividing.
class CorpusWer {
public:
    void add(const std::vector<GlossId>& reference, const std::vector<GlossId>& hypothesis);
    const EditCounts& counts() const { return counts_; }
    double wer() const { return counts_.wer(); }

private:
    EditCounts counts_;
};

}  // namespace mska::decode
