#include "mska/train/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

#include "mska/errors.hpp"
#include "mska/text.hpp"

namespace mska::train {
namespace {

using data::Stream;

std::string join(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += v[i];
    }
    return out;
}

const char* bool_text(bool b) { return b ? "true" : "false"; }

struct Parser {
    std::string source;
    std::size_t line = 0;

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError(source + ":" + std::to_string(line) + ": " + what);
    }

    double real(std::string_view v) const {
        auto d = text::parse_double(v);
        if (!d) fail("expected a number, got '" + std::string(v) + "'");
        return *d;
    }

    std::size_t count(std::string_view v) const {
        auto n = text::parse_size(v);
        if (!n) fail("expected a non-negative integer, got '" + std::string(v) + "'");
        return *n;
    }

    bool flag(std::string_view v) const {
        if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "off" || v == "no") return false;
        fail("expected a boolean, got '" + std::string(v) + "'");
    }

    std::vector<std::string> words(std::string_view v) const {
        std::vector<std::string> out;
        for (auto part : text::split(v, ',')) {
            auto t = text::trim(part);
            if (t.empty()) fail("empty list element in '" + std::string(v) + "'");
            out.emplace_back(t);
        }
        return out;
    }

    std::vector<std::size_t> counts(std::string_view v) const {
        std::vector<std::size_t> out;
        for (const auto& w : words(v)) out.push_back(count(w));
        return out;
    }
};

Stream parse_stream(const Parser& p, const std::string& name) {
    for (auto s : data::kAllStreams) {
        if (data::stream_name(s) == name) return s;
    }
    p.fail("unknown stream '" + name + "'");
}

}  // namespace

std::vector<std::size_t> default_channels(std::size_t blocks) {
    static const std::vector<std::size_t> pattern{64, 64, 128, 128};
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < blocks; ++i) out.push_back(i < pattern.size() ? pattern[i] : 256);
    return out;
}

std::vector<std::size_t> default_strides(const std::vector<std::size_t>& channels) {
    std::vector<std::size_t> strides(channels.size(), 1);
    std::size_t product = 1;
    for (std::size_t i = 1; i < channels.size() && product < 4; ++i) {
        if (channels[i] > channels[i - 1]) {
            strides[i] = 2;
            product *= 2;
        }
    }
    for (std::size_t i = 0; i < channels.size() && product < 4; ++i) {
        if (strides[i] == 1) {
            strides[i] = 2;
            product *= 2;
        }
    }
    return strides;
}

RunConfig RunConfig::paper() { return RunConfig{}; }

RunConfig RunConfig::desk() {
    RunConfig c;
    c.arch.encoder.channels = {32, 64};
    c.arch.encoder.strides = {2, 2};
    c.arch.encoder.heads = 2;
    c.arch.head_width = 64;
    c.batch_size = 10;
    c.lr = 1.5e-2;
    return c;
}

RunConfig RunConfig::parse(std::string_view content, const std::string& source) {
    Parser p{source};
    std::vector<std::pair<std::size_t, std::pair<std::string, std::string>>> entries;
    std::optional<std::string> preset;
    std::size_t preset_line = 0;

    std::size_t line_no = 0;
    for (auto raw : text::split(content, '\n')) {
        ++line_no;
        auto hash = raw.find('#');
        auto line = text::trim(hash == std::string_view::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        auto eq = line.find('=');
        p.line = line_no;
        if (eq == std::string_view::npos) p.fail("expected 'key = value'");
        std::string key(text::trim(line.substr(0, eq)));
        std::string value(text::trim(line.substr(eq + 1)));
        if (key.empty()) p.fail("missing key");
        if (value.empty()) p.fail("missing value for '" + key + "'");
        for (const auto& e : entries) {
            if (e.second.first == key) p.fail("duplicate key '" + key + "'");
        }
        if (key == "preset") {
            if (preset) p.fail("duplicate key 'preset'");
            preset = value;
            preset_line = line_no;
            continue;
        }
        entries.push_back({line_no, {key, value}});
    }

    RunConfig c;
    if (preset) {
        p.line = preset_line;
        if (*preset == "paper") {
            c = paper();
        } else if (*preset == "desk") {
            c = desk();
        } else {
            p.fail("unknown preset '" + *preset + "'");
        }
    }

    std::optional<std::size_t> blocks;
    bool channels_set = false, strides_set = false;
    std::size_t blocks_line = 0;
    auto& enc = c.arch.encoder;

    using Setter = std::function<void(const std::string&)>;
    const std::map<std::string, Setter> setters{
        {"encoder.blocks", [&](const std::string& v) { blocks = p.count(v); blocks_line = p.line; }},
        {"encoder.channels", [&](const std::string& v) { enc.channels = p.counts(v); channels_set = true; }},
        {"encoder.strides", [&](const std::string& v) { enc.strides = p.counts(v); strides_set = true; }},
        {"encoder.heads", [&](const std::string& v) { enc.heads = p.count(v); }},
        {"encoder.embed_channels", [&](const std::string& v) { enc.embed_channels = p.count(v); }},
        {"encoder.sgr", [&](const std::string& v) { enc.global_regularization = p.flag(v); }},
        {"head.width", [&](const std::string& v) { c.arch.head_width = p.count(v); }},
        {"model.streams",
         [&](const std::string& v) {
             c.arch.streams.clear();
             for (const auto& w : p.words(v)) {
                 auto s = parse_stream(p, w);
                 if (c.arch.has_stream(s)) p.fail("stream '" + w + "' listed twice");
                 c.arch.streams.push_back(s);
             }
         }},
        {"model.fuse", [&](const std::string& v) { c.arch.fuse = p.flag(v); }},
        {"data.vocabulary", [&](const std::string& v) { c.vocabulary = v; }},
        {"loss.distill_weight", [&](const std::string& v) { c.distill_weight = p.real(v); }},
        {"optim.lr", [&](const std::string& v) { c.lr = p.real(v); }},
        {"optim.weight_decay", [&](const std::string& v) { c.weight_decay = p.real(v); }},
        {"optim.batch_size", [&](const std::string& v) { c.batch_size = p.count(v); }},
        {"optim.epochs", [&](const std::string& v) { c.epochs = static_cast<int>(p.count(v)); }},
        {"optim.clip_norm", [&](const std::string& v) { c.clip_norm = p.real(v); }},
        {"augment.temporal", [&](const std::string& v) { c.augment.temporal = p.flag(v); }},
        {"augment.rotate", [&](const std::string& v) { c.augment.rotate = p.flag(v); }},
        {"augment.scale", [&](const std::string& v) { c.augment.scale = p.flag(v); }},
        {"augment.translate", [&](const std::string& v) { c.augment.translate = p.flag(v); }},
        {"augment.temporal_min", [&](const std::string& v) { c.augment.temporal_min = p.real(v); }},
        {"augment.temporal_max", [&](const std::string& v) { c.augment.temporal_max = p.real(v); }},
        {"augment.rotate_max", [&](const std::string& v) { c.augment.rotate_max = p.real(v); }},
        {"augment.scale_min", [&](const std::string& v) { c.augment.scale_min = p.real(v); }},
        {"augment.scale_max", [&](const std::string& v) { c.augment.scale_max = p.real(v); }},
        {"augment.translate_max", [&](const std::string& v) { c.augment.translate_max = p.real(v); }},
        {"seed",
         [&](const std::string& v) {
             std::uint64_t s = 0;
             std::istringstream is(v);
             if (!(is >> s) || !is.eof()) p.fail("expected an unsigned seed, got '" + v + "'");
             c.seed = s;
         }},
        {"decode.beam_width", [&](const std::string& v) { c.beam_width = p.count(v); }},
        {"decode.ensemble", [&](const std::string& v) { c.ensemble = p.words(v); }},
        {"split.train", [&](const std::string& v) { c.train_split = v; }},
        {"split.dev", [&](const std::string& v) { c.dev_split = v; }},
    };

    for (const auto& [line, kv] : entries) {
        p.line = line;
        auto it = setters.find(kv.first);
        if (it == setters.end()) p.fail("unknown key '" + kv.first + "'");
        it->second(kv.second);
    }

    if (blocks) {
        p.line = blocks_line;
        if (channels_set) {
            if (*blocks != enc.channels.size()) p.fail("encoder.blocks disagrees with encoder.channels");
        } else {
            enc.channels = default_channels(*blocks);
        }
    }
    if (!strides_set && (blocks || channels_set)) enc.strides = default_strides(enc.channels);

    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path.string());
}

void RunConfig::validate() const {
    try {
        arch.encoder.validate();
        augment.validate();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    if (arch.streams.empty()) throw ConfigError("model.streams must name at least one stream");
    if (arch.head_width == 0) throw ConfigError("head.width must be positive");
    if (!(lr > 0.0)) throw ConfigError("optim.lr must be positive");
    if (weight_decay < 0.0) throw ConfigError("optim.weight_decay must be non-negative");
    if (batch_size == 0) throw ConfigError("optim.batch_size must be positive");
    if (epochs <= 0) throw ConfigError("optim.epochs must be positive");
    if (clip_norm < 0.0) throw ConfigError("optim.clip_norm must be non-negative");
    if (distill_weight < 0.0) throw ConfigError("loss.distill_weight must be non-negative");
    if (beam_width == 0) throw ConfigError("decode.beam_width must be positive");
    if (ensemble.empty()) throw ConfigError("decode.ensemble must name at least one head");
    for (const auto& e : ensemble) {
        if (e != "left" && e != "right" && e != "face" && e != "body" && e != "fuse") {
            throw ConfigError("unknown ensemble member '" + e + "'");
        }
    }
    if (vocabulary.empty()) throw ConfigError("data.vocabulary must not be empty");
}

std::string RunConfig::canonical() const {
    const auto& enc = arch.encoder;
    std::vector<std::string> streams;
    for (auto s : arch.streams) streams.emplace_back(data::stream_name(s));

    std::ostringstream os;
    auto put = [&](const char* key, const std::string& value) { os << key << " = " << value << '\n'; };
    put("encoder.blocks", std::to_string(enc.blocks()));
    put("encoder.channels", join(enc.channels));
    put("encoder.strides", join(enc.strides));
    put("encoder.heads", std::to_string(enc.heads));
    put("encoder.embed_channels", std::to_string(enc.embed_channels));
    put("encoder.sgr", bool_text(enc.global_regularization));
    put("head.width", std::to_string(arch.head_width));
    put("model.streams", join(streams));
    put("model.fuse", bool_text(arch.fuse));
    put("data.vocabulary", vocabulary);
    put("loss.distill_weight", text::format_double(distill_weight));
    put("optim.lr", text::format_double(lr));
    put("optim.weight_decay", text::format_double(weight_decay));
    put("optim.batch_size", std::to_string(batch_size));
    put("optim.epochs", std::to_string(epochs));
    put("optim.clip_norm", text::format_double(clip_norm));
    put("augment.temporal", bool_text(augment.temporal));
    put("augment.rotate", bool_text(augment.rotate));
    put("augment.scale", bool_text(augment.scale));
    put("augment.translate", bool_text(augment.translate));
    put("augment.temporal_min", text::format_double(augment.temporal_min));
    put("augment.temporal_max", text::format_double(augment.temporal_max));
    put("augment.rotate_max", text::format_double(augment.rotate_max));
    put("augment.scale_min", text::format_double(augment.scale_min));
    put("augment.scale_max", text::format_double(augment.scale_max));
    put("augment.translate_max", text::format_double(augment.translate_max));
    put("seed", std::to_string(seed));
    put("decode.beam_width", std::to_string(beam_width));
    put("decode.ensemble", join(ensemble));
    put("split.train", train_split);
    put("split.dev", dev_split);
    return os.str();
}

std::uint64_t RunConfig::fingerprint() const { return text::fnv1a(canonical()); }

}  // namespace mska::train
