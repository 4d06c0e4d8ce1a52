#include "mska/train/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mska/data/layout.hpp"
#include "mska/errors.hpp"
#include "mska/text.hpp"

namespace mska::train {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian hosts");

constexpr char kMagic[8] = {'M', 'S', 'K', 'A', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    explicit Writer(std::ostream& os) : os_(os) {}

    template <class T>
    void pod(T v) {
        os_.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    void str(const std::string& s) {
        pod<std::uint64_t>(s.size());
        os_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    void doubles(std::span<const double> v) {
        pod<std::uint64_t>(v.size());
        os_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    }

private:
    std::ostream& os_;
};

class Reader {
public:
    Reader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}

    template <class T>
    T pod() {
        T v{};
        is_.read(reinterpret_cast<char*>(&v), sizeof v);
        if (!is_) fail("truncated file");
        return v;
    }
    std::string str() {
        const auto n = length(1);
        std::string s(n, '\0');
        is_.read(s.data(), static_cast<std::streamsize>(n));
        if (!is_) fail("truncated file");
        return s;
    }
    std::vector<double> doubles() {
        const auto n = length(sizeof(double));
        std::vector<double> v(n);
        is_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
        if (!is_) fail("truncated file");
        return v;
    }
    void expect_end() {
        if (is_.peek() != std::char_traits<char>::eof()) fail("trailing bytes");
    }
    [[noreturn]] void fail(const std::string& what) const {
        throw InputError("checkpoint " + source_ + ": " + what);
    }

private:
    std::uint64_t length(std::size_t unit) {
        const auto n = pod<std::uint64_t>();
        if (n > (std::uint64_t{1} << 40) / unit) fail("implausible length");
        return n;
    }

    std::istream& is_;
    std::string source_;
};

Checkpoint read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FilesystemError("cannot open checkpoint " + path.string());
    Reader r(in, path.string());

    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) r.fail("not a checkpoint file");
    if (r.pod<std::uint32_t>() != kVersion) r.fail("unsupported format version");
    const auto fingerprint = r.pod<std::uint64_t>();
    const auto config_text = r.str();
    if (text::fnv1a(config_text) != fingerprint) throw ConfigError("checkpoint " + path.string() + ": config fingerprint mismatch");

    Checkpoint ck{RunConfig::parse(config_text, path.string() + "#config"), {}, {}, nullptr, core::Adam{}};
    const auto vocab_size = r.pod<std::uint64_t>();
    for (std::uint64_t i = 0; i < vocab_size; ++i) ck.vocabulary.push_back(r.str());
    if (ck.vocabulary.empty()) r.fail("empty vocabulary");

    ck.state.next_epoch = r.pod<std::uint64_t>();
    ck.state.global_step = r.pod<std::uint64_t>();
    ck.state.best_dev_wer = r.pod<double>();
    ck.state.best_epoch = r.pod<std::int64_t>();

    ck.model = std::make_unique<model::MskaModel>(ck.config.arch, data::StreamLayout::standard(),
                                                  ck.vocabulary.size() + 1, ck.config.seed);
    core::AdamOptions opts;
    opts.lr = r.pod<double>();
    opts.weight_decay = ck.config.weight_decay;
    ck.optimizer = core::Adam(opts);
    ck.optimizer.set_steps(r.pod<std::uint64_t>());

    auto& store = ck.model->parameters();
    if (r.pod<std::uint64_t>() != store.values().size()) r.fail("parameter count differs from the model");
    const bool has_moments = r.pod<std::uint8_t>() != 0;
    auto& m = ck.optimizer.first_moments();
    auto& v = ck.optimizer.second_moments();
    for (std::size_t i = 0; i < store.values().size(); ++i) {
        if (r.str() != store.names()[i]) r.fail("parameter name mismatch at " + store.names()[i]);
        auto& p = store.values()[i];
        auto data = r.doubles();
        if (data.size() != p.size()) r.fail("parameter size mismatch for " + store.names()[i]);
        std::copy(data.begin(), data.end(), p.mutable_data().begin());
        if (has_moments) {
            m.push_back(r.doubles());
            v.push_back(r.doubles());
            if (m.back().size() != p.size() || v.back().size() != p.size()) r.fail("moment size mismatch");
        }
    }
    auto& bns = store.batch_norms();
    if (r.pod<std::uint64_t>() != bns.size()) r.fail("batch-norm count differs from the model");
    for (std::size_t i = 0; i < bns.size(); ++i) {
        if (r.str() != store.batch_norm_names()[i]) r.fail("batch-norm name mismatch");
        auto mean = r.doubles();
        auto var = r.doubles();
        if (mean.size() != bns[i]->running_mean.size() || var.size() != bns[i]->running_var.size()) {
            r.fail("batch-norm size mismatch");
        }
        bns[i]->running_mean = std::move(mean);
        bns[i]->running_var = std::move(var);
    }
    r.expect_end();
    return ck;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const RunConfig& config,
                     const std::vector<std::string>& vocabulary, model::MskaModel& model, core::Adam& optimizer,
                     const TrainingState& state) {
    std::ostringstream buf(std::ios::binary);
    Writer w(buf);
    buf.write(kMagic, sizeof kMagic);
    w.pod(kVersion);
    const auto text = config.canonical();
    w.pod(text::fnv1a(text));
    w.str(text);
    w.pod<std::uint64_t>(vocabulary.size());
    for (const auto& g : vocabulary) w.str(g);
    w.pod(state.next_epoch);
    w.pod(state.global_step);
    w.pod(state.best_dev_wer);
    w.pod(state.best_epoch);
    w.pod(optimizer.options().lr);
    w.pod(optimizer.steps());

    auto& store = model.parameters();
    w.pod<std::uint64_t>(store.values().size());
    const bool has_moments = !optimizer.first_moments().empty();
    w.pod<std::uint8_t>(has_moments ? 1 : 0);
    for (std::size_t i = 0; i < store.values().size(); ++i) {
        w.str(store.names()[i]);
        w.doubles(store.values()[i].data());
        if (has_moments) {
            w.doubles(optimizer.first_moments()[i]);
            w.doubles(optimizer.second_moments()[i]);
        }
    }
    const auto& bns = store.batch_norms();
    w.pod<std::uint64_t>(bns.size());
    for (std::size_t i = 0; i < bns.size(); ++i) {
        w.str(store.batch_norm_names()[i]);
        w.doubles(bns[i]->running_mean);
        w.doubles(bns[i]->running_var);
    }

    // Write to a sibling file first so an interrupted save never leaves a
    // truncated checkpoint behind.
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FilesystemError("cannot write checkpoint " + tmp.string());
        const auto bytes = buf.str();
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw FilesystemError("cannot write checkpoint " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw FilesystemError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return read(path); }

Checkpoint load_checkpoint(const std::filesystem::path& path, const RunConfig& expected) {
    auto ck = read(path);
    if (ck.config.fingerprint() != expected.fingerprint()) {
        throw ConfigError("checkpoint " + path.string() + " was produced by a different configuration");
    }
    return ck;
}

}  // namespace mska::train
