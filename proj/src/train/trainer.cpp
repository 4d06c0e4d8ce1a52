#include "mska/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "mska/augment.hpp"
#include "mska/core/optim.hpp"
#include "mska/errors.hpp"
#include "mska/loss/ctc.hpp"
#include "mska/loss/slr.hpp"
#include "mska/text.hpp"
#include "mska/train/checkpoint.hpp"

namespace mska::train {
namespace {

// Sample index reserved for the per-epoch shuffle stream.
constexpr std::uint64_t kShuffleStream = ~std::uint64_t{0};

std::string hex(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << v;
    return os.str();
}

class Log {
public:
    Log(const std::filesystem::path& path, bool append)
        : out_(path, append ? std::ios::app : std::ios::trunc), path_(path) {
        if (!out_) throw FilesystemError("cannot open log " + path.string());
    }
    void line(const std::string& s) {
        out_ << s << '\n';
        out_.flush();
        if (!out_) throw FilesystemError("cannot write log " + path_.string());
    }

private:
    std::ofstream out_;
    std::filesystem::path path_;
};

}  // namespace

TrainResult train(const RunConfig& config, const data::Dataset& dataset, const TrainOptions& options) {
    config.validate();
    const auto train_set = dataset.split(config.train_split);
    if (train_set.empty()) throw InputError("split '" + config.train_split + "' has no samples");
    const auto dev_set = dataset.split(config.dev_split);

    std::error_code ec;
    std::filesystem::create_directories(options.out_dir, ec);
    if (ec) throw FilesystemError("cannot create " + options.out_dir.string() + ": " + ec.message());

    std::unique_ptr<model::MskaModel> model;
    core::Adam adam;
    TrainingState state;
    if (options.resume) {
        auto ck = load_checkpoint(*options.resume, config);
        if (ck.vocabulary != dataset.vocab.glosses()) {
            throw InputError("checkpoint vocabulary differs from the dataset vocabulary");
        }
        model = std::move(ck.model);
        adam = std::move(ck.optimizer);
        state = ck.state;
    } else {
        model = std::make_unique<model::MskaModel>(config.arch, data::StreamLayout::standard(),
                                                   dataset.vocab.num_classes(), config.seed);
        core::AdamOptions opts;
        opts.lr = config.lr;
        opts.weight_decay = config.weight_decay;
        adam = core::Adam(opts);
        state.best_dev_wer = std::numeric_limits<double>::infinity();
    }

    Log log(options.out_dir / kLogFile, options.resume.has_value());
    if (options.resume) {
        log.line("resume epoch=" + std::to_string(state.next_epoch) + " step=" + std::to_string(state.global_step));
    } else {
        log.line("run fingerprint=" + hex(config.fingerprint()) + " train=" + std::to_string(train_set.size()) +
                 " dev=" + std::to_string(dev_set.size()) +
                 " parameters=" + std::to_string(model->parameters().scalar_count()));
    }

    const auto& layout = model->layout();
    const std::size_t down = config.arch.encoder.downsampling();
    const auto blank = dataset.vocab.blank_id();
    auto& params = model->parameters().values();
    const Evaluator evaluator(*model, config);

    TrainResult result;
    result.best_dev_wer = state.best_dev_wer;
    result.best_epoch = static_cast<int>(state.best_epoch);

    for (int epoch = static_cast<int>(state.next_epoch); epoch < config.epochs; ++epoch) {
        if (options.stop_after && epoch >= *options.stop_after) break;
        const auto started = std::chrono::steady_clock::now();

        EpochRecord record;
        record.epoch = epoch;
        record.lr = core::cosine_lr(epoch, config.epochs, config.lr);
        adam.options().lr = record.lr;

        std::vector<std::size_t> order(train_set.size());
        std::iota(order.begin(), order.end(), 0);
        auto shuffle_rng = augment::sample_rng(config.seed, static_cast<std::uint64_t>(epoch), kShuffleStream);
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double loss_sum = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t end = std::min(order.size(), begin + config.batch_size);
            std::vector<data::KeypointSequence> seqs;
            std::vector<std::vector<data::GlossId>> targets;
            for (std::size_t i = begin; i < end; ++i) {
                const auto& sample = *train_set[order[i]];
                auto rng = augment::sample_rng(config.seed, static_cast<std::uint64_t>(epoch), order[i]);
                auto seq = augment::augment_pipeline(sample.keypoints, config.augment, rng);
                const std::size_t out_frames = (seq.frames() + down - 1) / down;
                const std::size_t needed = loss::ctc_min_frames(sample.target);
                if (needed > out_frames) {
                    log.line("warning epoch=" + std::to_string(epoch) + " sample=" + sample.id +
                             " skipped: target needs " + std::to_string(needed) + " frames, input gives " +
                             std::to_string(out_frames));
                    ++record.skipped;
                    continue;
                }
                seqs.push_back(std::move(seq));
                targets.push_back(sample.target);
            }
            if (seqs.empty()) continue;

            const auto batch = model::make_batch(seqs, layout, down);
            const auto output = model->forward(batch, true);
            const auto loss = loss::slr_loss(output, targets, blank, config.distill_weight);
            model->parameters().zero_grad();
            core::backward(loss.total);
            const double grad_norm = config.clip_norm > 0.0
                                         ? core::clip_grad_norm(params, config.clip_norm)
                                         : core::clip_grad_norm(params, std::numeric_limits<double>::infinity());
            adam.step(params);
            ++state.global_step;
            ++record.steps;

            const double total = loss.report.total;
            loss_sum += total;
            result.step_losses.push_back(total);
            log.line("step=" + std::to_string(state.global_step) + " epoch=" + std::to_string(epoch) +
                     " batch=" + std::to_string(seqs.size()) + ' ' + loss.report.to_log_fields() +
                     " grad_norm=" + text::format_double(grad_norm));
        }
        record.mean_loss = record.steps ? loss_sum / static_cast<double>(record.steps) : 0.0;

        if (!dev_set.empty()) {
            record.dev = evaluator.report(evaluator.run_all(dev_set, options.threads), config.dev_split);
            const double wer = record.dev->wer(kEnsembleColumn);
            if (wer < state.best_dev_wer) {
                state.best_dev_wer = wer;
                state.best_epoch = epoch;
                record.best = true;
            }
        } else {
            state.best_epoch = epoch;
            record.best = true;
        }
        state.next_epoch = static_cast<std::uint64_t>(epoch) + 1;

        std::ostringstream line;
        line << "epoch=" << epoch << " lr=" << text::format_double(record.lr) << " steps=" << record.steps
             << " skipped=" << record.skipped << " train_loss=" << text::format_double(record.mean_loss);
        if (record.dev) {
            line << record.dev->to_log_fields("dev_wer_");
        } else {
            line << " dev_wer=na";
        }
        line << " best=" << (record.best ? 1 : 0);
        log.line(line.str());

        save_checkpoint(options.out_dir / kLastCheckpoint, config, dataset.vocab.glosses(), *model, adam, state);
        if (record.best) {
            save_checkpoint(options.out_dir / kBestCheckpoint, config, dataset.vocab.glosses(), *model, adam, state);
        }

        if (options.progress) {
            const double seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
            std::ostringstream p;
            p.precision(4);
            p << "epoch " << epoch << " loss " << record.mean_loss;
            if (record.dev) p << " dev_wer " << record.dev->wer(kEnsembleColumn);
            p << " (" << seconds << " s)\n";
            *options.progress << p.str() << std::flush;
        }
        result.epochs.push_back(std::move(record));
    }
    result.best_dev_wer = state.best_dev_wer;
    result.best_epoch = static_cast<int>(state.best_epoch);
    return result;
}

}  // namespace mska::train
