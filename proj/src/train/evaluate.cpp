#include "mska/train/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "mska/errors.hpp"
#include "mska/text.hpp"

namespace mska::train {
namespace {

// Rows [0, frames) of sample b in a [B, T', C] tensor.
decode::FrameMatrix rows(const core::Value& v, std::size_t b, std::size_t frames) {
    const std::size_t T = v.dim(1), C = v.dim(2);
    const auto d = v.data();
    decode::FrameMatrix m{frames, C, {}};
    m.values.assign(d.begin() + static_cast<long>(b * T * C), d.begin() + static_cast<long>((b * T + frames) * C));
    return m;
}

const model::HeadOutput* column_head(const model::ModelOutput& out, std::size_t column) {
    if (column < 4) return out.head(data::kAllStreams[column]);
    if (column == 4 && out.fuse) return &*out.fuse;
    return nullptr;
}

}  // namespace

double EvalReport::wer(std::size_t column) const {
    if (column >= kColumns || !columns[column]) throw ContractError("report column is absent");
    return columns[column]->wer();
}

std::string EvalReport::to_text() const {
    std::ostringstream os;
    os << "split=" << split << '\n' << "samples=" << samples << '\n';
    for (std::size_t c = 0; c < kColumns; ++c) {
        const std::string name = kColumnNames[c];
        if (columns[c]) {
            const auto& e = *columns[c];
            os << "wer_" << name << '=' << text::format_double(e.wer()) << '\n';
            os << "sub_" << name << '=' << e.substitutions << '\n';
            os << "ins_" << name << '=' << e.insertions << '\n';
            os << "del_" << name << '=' << e.deletions << '\n';
        } else {
            for (const char* k : {"wer_", "sub_", "ins_", "del_"}) os << k << name << "=na\n";
        }
    }
    return os.str();
}

std::string EvalReport::to_log_fields(const std::string& prefix) const {
    std::ostringstream os;
    for (std::size_t c = 0; c < kColumns; ++c) {
        os << ' ' << prefix << kColumnNames[c] << '='
           << (columns[c] ? text::format_double(columns[c]->wer()) : std::string("na"));
    }
    return os.str();
}

Evaluator::Evaluator(const model::MskaModel& model, const RunConfig& config) : model_(model), config_(config) {
    const auto& arch = model.config();
    auto present = [&](std::size_t c) {
        return c < 4 ? arch.has_stream(data::kAllStreams[c]) : arch.has_fuse();
    };
    for (std::size_t c = 0; c < 5; ++c) {
        const bool listed =
            std::find(config.ensemble.begin(), config.ensemble.end(), kColumnNames[c]) != config.ensemble.end();
        if (listed && present(c)) members_.push_back(c);
    }
    // Fall back to every available head when none of the listed ones exist.
    if (members_.empty()) {
        for (std::size_t c = 0; c < 5; ++c) {
            if (present(c)) members_.push_back(c);
        }
    }
}

model::ModelOutput Evaluator::forward(const data::Sample& sample) const {
    core::NoGradGuard no_grad;
    const auto batch = model::make_batch({sample.keypoints}, model_.layout(), model_.config().encoder.downsampling());
    return model_.forward(batch, false);
}

SampleResult Evaluator::run(const data::Sample& sample) const {
    const auto out = forward(sample);
    const std::size_t frames = out.lengths.at(0);
    const auto blank = static_cast<data::GlossId>(model_.num_classes() - 1);

    SampleResult r;
    r.id = sample.id;
    r.reference = sample.target;
    for (std::size_t c = 0; c < 5; ++c) {
        if (const auto* h = column_head(out, c)) {
            auto best = decode::beam_decode(rows(h->log_probs, 0, frames), config_.beam_width, blank).front();
            r.hypotheses[c] = std::move(best.glosses);
        }
    }
    std::vector<decode::FrameMatrix> probs;
    for (auto c : members_) probs.push_back(decode::exp(rows(column_head(out, c)->log_probs, 0, frames)));
    auto best = decode::beam_decode(decode::log(decode::ensemble(probs)), config_.beam_width, blank).front();
    r.hypotheses[kEnsembleColumn] = std::move(best.glosses);
    r.ensemble_score = best.score;
    return r;
}

std::vector<SampleResult> Evaluator::run_all(const std::vector<const data::Sample*>& samples,
                                             std::size_t threads) const {
    std::vector<SampleResult> results(samples.size());
    threads = std::max<std::size_t>(1, std::min(threads, samples.size()));
    if (threads == 1) {
        for (std::size_t i = 0; i < samples.size(); ++i) results[i] = run(*samples[i]);
        return results;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < samples.size(); i = next++) {
            try {
                results[i] = run(*samples[i]);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
    return results;
}

EvalReport Evaluator::report(const std::vector<SampleResult>& results, const std::string& split) const {
    EvalReport rep;
    rep.split = split;
    rep.samples = results.size();
    for (std::size_t c = 0; c < kColumns; ++c) {
        if (results.empty() || !results.front().hypotheses[c]) continue;
        decode::CorpusWer corpus;
        for (const auto& r : results) corpus.add(r.reference, *r.hypotheses[c]);
        rep.columns[c] = corpus.counts();
    }
    return rep;
}

decode::FrameMatrix Evaluator::representation(const data::Sample& sample) const {
    const auto out = forward(sample);
    const model::HeadOutput* h = out.fuse ? &*out.fuse : nullptr;
    if (!h) {
        for (auto s : data::kAllStreams) {
            if ((h = out.head(s))) break;
        }
    }
    return rows(h->representation, 0, out.lengths.at(0));
}

std::size_t worker_threads() {
    if (const char* env = std::getenv("MSKA_THREADS")) {
        if (auto n = text::parse_size(env); n && *n > 0) return *n;
    }
    return 1;
}

}  // namespace mska::train
