// Command-line entry point: synth, train, eval, decode, export.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "mska/core/value.hpp"
#include "mska/errors.hpp"
#include "mska/text.hpp"
#include "mska/train/checkpoint.hpp"
#include "mska/train/config.hpp"
#include "mska/train/evaluate.hpp"
#include "mska/train/synthetic.hpp"
#include "mska/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace mska;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct Loaded {
    train::Checkpoint ck;
    data::Dataset data;
};

Loaded open(const fs::path& ckpt, const fs::path& dir) {
    auto ck = train::load_checkpoint(ckpt);
    auto data = data::Dataset::load(dir, ck.config.vocabulary);
    if (data.vocab.glosses() != ck.vocabulary) {
        throw InputError("vocabulary in " + dir.string() + " differs from the checkpoint's");
    }
    return {std::move(ck), std::move(data)};
}

std::vector<const data::Sample*> select(const data::Dataset& d, const std::string& split) {
    if (split.empty()) {
        std::vector<const data::Sample*> all;
        for (const auto& s : d.samples) all.push_back(&s);
        return all;
    }
    if (!d.has_split(split)) throw InputError("unknown split '" + split + "'");
    return d.split(split);
}

std::string joined(const std::vector<std::string>& words) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out += ' ';
        out += words[i];
    }
    return out;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw FilesystemError("cannot write " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-stream keypoint attention sign recognition"};
    app.require_subcommand(1);

    fs::path spec_file, config_file, data_dir, out_path, ckpt_file, resume_file;
    std::string split;
    int stop_after = -1;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic keypoint corpus");
    synth->add_option("--spec", spec_file, "Synthetic spec file (key = value)");
    synth->add_option("--out", out_path, "Output directory")->required();

    auto* trn = app.add_subcommand("train", "Train a model");
    trn->add_option("--config", config_file, "Run configuration file")->required();
    trn->add_option("--data", data_dir, "Data directory")->required();
    trn->add_option("--out", out_path, "Output directory")->required();
    trn->add_option("--resume", resume_file, "Checkpoint to resume from");
    trn->add_option("--stop-after", stop_after, "Stop once this many epochs are complete");

    auto* ev = app.add_subcommand("eval", "Report WER per head and for the ensemble");
    ev->add_option("--ckpt", ckpt_file)->required();
    ev->add_option("--data", data_dir)->required();
    ev->add_option("--split", split)->required();

    std::string decode_split = "test";
    auto* dec = app.add_subcommand("decode", "Write ensemble hypotheses as id<TAB>glosses");
    dec->add_option("--ckpt", ckpt_file)->required();
    dec->add_option("--data", data_dir)->required();
    dec->add_option("--out", out_path)->required();
    dec->add_option("--split", decode_split, "Split to decode")->capture_default_str();

    auto* exp = app.add_subcommand("export", "Write gloss representations, one file per sample");
    exp->add_option("--ckpt", ckpt_file)->required();
    exp->add_option("--data", data_dir)->required();
    exp->add_option("--out", out_path)->required();
    exp->add_option("--split", split, "Restrict to one split (default: all samples)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitConfig;
    }

    core::tune_allocator();
    try {
        if (*synth) {
            const auto spec = spec_file.empty() ? train::SyntheticSpec{} : train::SyntheticSpec::load(spec_file);
            train::SyntheticGenerator(spec).write(out_path);
            std::cout << "wrote " << spec.train_samples + spec.dev_samples + spec.test_samples << " samples to "
                      << out_path.string() << '\n';
        } else if (*trn) {
            const auto config = train::RunConfig::load(config_file);
            const auto data = data::Dataset::load(data_dir, config.vocabulary);
            train::TrainOptions opts;
            opts.out_dir = out_path;
            if (!resume_file.empty()) opts.resume = resume_file;
            if (stop_after >= 0) opts.stop_after = stop_after;
            opts.progress = &std::cout;
            opts.threads = train::worker_threads();
            const auto result = train::train(config, data, opts);
            std::cout << "best_dev_wer=" << text::format_double(result.best_dev_wer)
                      << " best_epoch=" << result.best_epoch << '\n';
        } else if (*ev) {
            auto [ck, data] = open(ckpt_file, data_dir);
            const train::Evaluator evaluator(*ck.model, ck.config);
            const auto samples = select(data, split);
            std::cout << evaluator.report(evaluator.run_all(samples, train::worker_threads()), split).to_text();
        } else if (*dec) {
            auto [ck, data] = open(ckpt_file, data_dir);
            const train::Evaluator evaluator(*ck.model, ck.config);
            const auto results = evaluator.run_all(select(data, decode_split), train::worker_threads());
            std::string content;
            for (const auto& r : results) {
                content += r.id + '\t' + joined(data.vocab.decode(*r.hypotheses[train::kEnsembleColumn])) + '\n';
            }
            write_file(out_path, content);
        } else if (*exp) {
            auto [ck, data] = open(ckpt_file, data_dir);
            const train::Evaluator evaluator(*ck.model, ck.config);
            std::error_code ec;
            fs::create_directories(out_path, ec);
            if (ec) throw FilesystemError("cannot create " + out_path.string() + ": " + ec.message());
            for (const auto* s : select(data, split)) {
                const auto rep = evaluator.representation(*s);
                std::string content = std::to_string(rep.frames) + ' ' + std::to_string(rep.classes) + '\n';
                for (std::size_t t = 0; t < rep.frames; ++t) {
                    for (std::size_t c = 0; c < rep.classes; ++c) {
                        if (c) content += ' ';
                        content += text::format_double(rep.at(t, c));
                    }
                    content += '\n';
                }
                write_file(out_path / (s->id + ".txt"), content);
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const InputError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const FilesystemError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const InfeasibleError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
