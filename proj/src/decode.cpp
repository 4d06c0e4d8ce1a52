#include "mska/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "mska/errors.hpp"

namespace mska::decode {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

struct PrefixScore {
    double blank = kNegInf;      // paths ending in blank
    double non_blank = kNegInf;  // paths ending in the prefix's last label
    double total() const { return log_add(blank, non_blank); }
};

using Beam = std::map<std::vector<GlossId>, PrefixScore>;

bool better(const std::pair<std::vector<GlossId>, double>& a, const std::pair<std::vector<GlossId>, double>& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
}

std::vector<std::pair<std::vector<GlossId>, double>> ranked(const Beam& beam) {
    std::vector<std::pair<std::vector<GlossId>, double>> out;
    out.reserve(beam.size());
    for (const auto& [prefix, score] : beam) out.emplace_back(prefix, score.total());
    std::sort(out.begin(), out.end(), better);
    return out;
}

template <class T>
EditCounts align(const std::vector<T>& ref, const std::vector<T>& hyp) {
    const std::size_t n = ref.size(), m = hyp.size();
    std::vector<std::size_t> cost((n + 1) * (m + 1));
    auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return cost[i * (m + 1) + j]; };
    for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
    for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
            at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
        }
    }
    EditCounts counts;
    counts.reference_length = n;
    std::size_t i = n, j = m;
    while (i > 0 || j > 0) {
        if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
            if (ref[i - 1] != hyp[j - 1]) ++counts.substitutions;
            --i;
            --j;
        } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
            ++counts.deletions;
            --i;
        } else {
            ++counts.insertions;
            --j;
        }
    }
    return counts;
}

}  // namespace

FrameMatrix ensemble(const std::vector<FrameMatrix>& probs) {
    if (probs.empty()) throw ContractError("ensemble: no inputs");
    FrameMatrix out{probs[0].frames, probs[0].classes, std::vector<double>(probs[0].values.size(), 0.0)};
    for (const auto& p : probs) {
        if (p.frames != out.frames || p.classes != out.classes || p.values.size() != out.values.size()) {
            throw DimensionError("ensemble: input shapes differ");
        }
        for (std::size_t i = 0; i < p.values.size(); ++i) out.values[i] += p.values[i];
    }
    const double inv = 1.0 / static_cast<double>(probs.size());
    for (auto& v : out.values) v *= inv;
    return out;
}

FrameMatrix exp(const FrameMatrix& log_probs) {
    FrameMatrix out = log_probs;
    for (auto& v : out.values) v = std::exp(v);
    return out;
}

FrameMatrix log(const FrameMatrix& probs) {
    FrameMatrix out = probs;
    for (auto& v : out.values) v = std::log(v);
    return out;
}

std::vector<Hypothesis> beam_decode(const FrameMatrix& log_probs, std::size_t beam_width, GlossId blank) {
    if (beam_width == 0) throw ContractError("beam_decode: beam width must be at least 1");
    if (log_probs.frames == 0) return {Hypothesis{}};
    if (blank >= log_probs.classes) throw ContractError("beam_decode: blank id outside class range");

    Beam beam;
    beam[{}] = PrefixScore{0.0, kNegInf};
    for (std::size_t t = 0; t < log_probs.frames; ++t) {
        Beam next;
        for (const auto& [prefix, score] : beam) {
            const double total = score.total();
            auto& same = next[prefix];
            same.blank = log_add(same.blank, total + log_probs.at(t, blank));
            if (!prefix.empty()) {
                same.non_blank = log_add(same.non_blank, score.non_blank + log_probs.at(t, prefix.back()));
            }
            for (GlossId c = 0; c < log_probs.classes; ++c) {
                if (c == blank) continue;
                auto extended = prefix;
                extended.push_back(c);
                auto& ext = next[extended];
                // A repeated label only extends the prefix across a blank.
                const double from = (!prefix.empty() && prefix.back() == c) ? score.blank : total;
                ext.non_blank = log_add(ext.non_blank, from + log_probs.at(t, c));
            }
        }
        const auto order = ranked(next);
        beam.clear();
        for (std::size_t i = 0; i < std::min(beam_width, order.size()); ++i) {
            beam.emplace(order[i].first, next.at(order[i].first));
        }
    }
    std::vector<Hypothesis> out;
    for (auto& [prefix, score] : ranked(beam)) out.push_back({prefix, std::min(score, 0.0)});
    return out;
}

EditCounts& EditCounts::operator+=(const EditCounts& o) {
    substitutions += o.substitutions;
    insertions += o.insertions;
    deletions += o.deletions;
    reference_length += o.reference_length;
    return *this;
}

double EditCounts::wer() const {
    if (reference_length == 0) throw ContractError("wer: empty reference");
    return 100.0 * static_cast<double>(errors()) / static_cast<double>(reference_length);
}

EditCounts edit_counts(const std::vector<std::string>& reference, const std::vector<std::string>& hypothesis) {
    return align(reference, hypothesis);
}

EditCounts edit_counts(const std::vector<GlossId>& reference, const std::vector<GlossId>& hypothesis) {
    return align(reference, hypothesis);
}

double wer(const std::vector<std::string>& reference, const std::vector<std::string>& hypothesis) {
    if (reference.empty()) throw ContractError("wer: empty reference");
    return edit_counts(reference, hypothesis).wer();
}

void CorpusWer::add(const std::vector<GlossId>& reference, const std::vector<GlossId>& hypothesis) {
    if (reference.empty()) throw ContractError("wer: empty reference");
    counts_ += edit_counts(reference, hypothesis);
}

}  // namespace mska::decode
