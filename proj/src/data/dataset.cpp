#include "mska/data/dataset.hpp"

#include <fstream>

#include "mska/errors.hpp"
#include "mska/text.hpp"

namespace mska::data {

GlossVocabulary::GlossVocabulary(std::vector<std::string> glosses) : glosses_(std::move(glosses)) {
    for (GlossId i = 0; i < glosses_.size(); ++i) {
        const auto& g = glosses_[i];
        if (g.empty() || text::split_ws(g).size() != 1) {
            throw InputError("vocabulary: gloss `" + g + "` must be a single non-empty token");
        }
        if (!ids_.emplace(g, i).second) throw InputError("vocabulary: duplicate gloss `" + g + "`");
    }
}

GlossId GlossVocabulary::id(const std::string& gloss) const {
    const auto it = ids_.find(gloss);
    if (it == ids_.end()) throw InputError("unknown gloss `" + gloss + "`");
    return it->second;
}

const std::string& GlossVocabulary::gloss(GlossId id) const {
    if (id >= glosses_.size()) throw InputError("gloss id " + std::to_string(id) + " out of range");
    return glosses_[id];
}

std::vector<GlossId> GlossVocabulary::encode(const std::vector<std::string>& glosses) const {
    std::vector<GlossId> out;
    out.reserve(glosses.size());
    for (const auto& g : glosses) out.push_back(id(g));
    return out;
}

std::vector<std::string> GlossVocabulary::decode(const std::vector<GlossId>& ids) const {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (auto i : ids) out.push_back(gloss(i));
    return out;
}

GlossVocabulary GlossVocabulary::load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw FilesystemError("cannot open vocabulary " + path.string());
    std::vector<std::string> glosses;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto g = text::trim(line);
        if (g.empty()) throw ParseError(path.string(), line_no, "empty gloss line");
        glosses.emplace_back(g);
    }
    if (glosses.empty()) throw ParseError(path.string(), 1, "vocabulary is empty");
    return GlossVocabulary(std::move(glosses));
}

void GlossVocabulary::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FilesystemError("cannot write " + path.string());
    for (const auto& g : glosses_) os << g << '\n';
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path, const GlossVocabulary& vocab) {
    std::ifstream is(path);
    if (!is) throw FilesystemError("cannot open manifest " + path.string());
    std::vector<ManifestEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const auto fields = text::split(line, '\t');
        if (fields.size() != 4) {
            throw ParseError(path.string(), line_no, "expected 4 tab-separated fields, found " +
                                                         std::to_string(fields.size()));
        }
        ManifestEntry e{std::string(text::trim(fields[0])), std::string(text::trim(fields[1])),
                        std::string(text::trim(fields[2])), {}};
        for (auto g : text::split_ws(fields[3])) {
            const std::string gloss(g);
            if (!vocab.contains(gloss)) {
                throw ParseError(path.string(), line_no, "gloss `" + gloss + "` is not in the vocabulary");
            }
            e.glosses.push_back(gloss);
        }
        if (e.id.empty() || e.path.empty() || e.split.empty()) {
            throw ParseError(path.string(), line_no, "empty id, path or split");
        }
        if (e.glosses.empty()) throw ParseError(path.string(), line_no, "empty gloss sequence");
        entries.push_back(std::move(e));
    }
    return entries;
}

void save_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FilesystemError("cannot write " + path.string());
    for (const auto& e : entries) {
        os << e.id << '\t' << e.path << '\t' << e.split << '\t';
        for (std::size_t i = 0; i < e.glosses.size(); ++i) os << (i ? " " : "") << e.glosses[i];
        os << '\n';
    }
}

Dataset Dataset::load(const std::filesystem::path& dir, const std::string& vocab_file) {
    Dataset ds;
    ds.vocab = GlossVocabulary::load(dir / vocab_file);
    for (auto& e : load_manifest(dir / kManifestFile, ds.vocab)) {
        auto seq = load_sequence(dir / e.path);
        ds.samples.push_back({e.id, e.split, normalize(seq), ds.vocab.encode(e.glosses)});
    }
    return ds;
}

std::vector<const Sample*> Dataset::split(const std::string& name) const {
    std::vector<const Sample*> out;
    for (const auto& s : samples) {
        if (s.split == name) out.push_back(&s);
    }
    return out;
}

bool Dataset::has_split(const std::string& name) const {
    for (const auto& s : samples) {
        if (s.split == name) return true;
    }
    return false;
}

}  // namespace mska::data
