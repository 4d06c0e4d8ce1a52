#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "mska/data/keypoints.hpp"

namespace mska::data {

using GlossId = std::size_t;

/// Dense gloss <-> id map. Ids run 0..V-1; the CTC blank is V.
class GlossVocabulary {
public:
    GlossVocabulary() = default;
    explicit GlossVocabulary(std::vector<std::string> glosses);

    std::size_t size() const noexcept { return glosses_.size(); }
    GlossId blank_id() const noexcept { return glosses_.size(); }
    std::size_t num_classes() const noexcept { return glosses_.size() + 1; }

    GlossId id(const std::string& gloss) const;  // throws InputError if unknown
    bool contains(const std::string& gloss) const { return ids_.count(gloss) != 0; }
    const std::string& gloss(GlossId id) const;
    const std::vector<std::string>& glosses() const noexcept { return glosses_; }

    std::vector<GlossId> encode(const std::vector<std::string>& glosses) const;
    std::vector<std::string> decode(const std::vector<GlossId>& ids) const;

    /// One gloss per line; line number (from 0) is the id.
    static GlossVocabulary load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

private:
    std::vector<std::string> glosses_;
    std::unordered_map<std::string, GlossId> ids_;
};

struct ManifestEntry {
    std::string id;
    std::string path;  // relative to the manifest's directory
    std::string split;
    std::vector<std::string> glosses;
};

/// `id<TAB>path<TAB>split<TAB>gloss1 gloss2 ...`, one record per line.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path,
                                         const GlossVocabulary& vocab);
void save_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);

struct Sample {
    std::string id;
    std::string split;
    KeypointSequence keypoints;  // normalized
    std::vector<GlossId> target;
};

inline constexpr const char* kManifestFile = "manifest.tsv";
inline constexpr const char* kVocabularyFile = "vocab.txt";

/// A data directory: vocabulary, manifest and every referenced keypoint file,
/// loaded and normalized eagerly.
struct Dataset {
    GlossVocabulary vocab;
    std::vector<Sample> samples;

    static Dataset load(const std::filesystem::path& dir,
                        const std::string& vocab_file = kVocabularyFile);

    std::vector<const Sample*> split(const std::string& name) const;
    bool has_split(const std::string& name) const;
};

}  // namespace mska::data
