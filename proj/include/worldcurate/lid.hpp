// Language identification interface with a character n-gram profile
// baseline, plus the LID-to-metadata grouping that yields the per-language
// metadata dictionary used by matching and counting.
#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>

#include "worldcurate/corpus.hpp"
#include "worldcurate/metadata.hpp"

namespace worldcurate {

// Catch-all key for texts and metadata languages no LID class covers.
inline constexpr const char* kOtherLang = "other";

struct LidResult {
    std::string lang;
    double confidence = 0.0;  // in [0, 1]
};

class LanguageClassifier {
public:
    virtual ~LanguageClassifier() = default;

    // Must be safe for concurrent read-only use. Returns a code from
    // supported_langs() or "other"; never guesses without evidence.
    virtual LidResult classify(std::string_view text) const = 0;
    virtual const std::set<std::string>& supported_langs() const = 0;
};

// Baseline classifier scoring texts against per-language character n-gram
// frequency profiles. Production users plug an external model instead.
class NgramProfileClassifier final : public LanguageClassifier {
public:
    using Profile = std::unordered_map<std::string, std::uint64_t>;  // ngram -> count

    static NgramProfileClassifier from_profiles(std::map<std::string, Profile> profiles);
    // Loads <lang>.profile files (lines "ngram<TAB>count") from a directory.
    static NgramProfileClassifier load(const std::filesystem::path& profile_dir);

    LidResult classify(std::string_view text) const override;
    const std::set<std::string>& supported_langs() const override;

private:
    struct LangProfile {
        std::string lang;
        std::unordered_map<std::string, double> relative_freq;
    };
    std::vector<LangProfile> profiles_;
    std::set<std::string> langs_;
    std::vector<std::size_t> ngram_lengths_;  // distinct code-point lengths seen in profiles
};

struct LanguageMapping {
    // Every LID language is a key, possibly with an empty group.
    std::map<std::string, std::set<std::string>> lid_to_meta;
    std::set<std::string> other_bucket;
};

// Groupings implied by shared word segmenters (zh variants, ryu->ja, dz->bo).
std::map<std::string, std::string> default_alias_table();
// CSV rows "meta_code,lid_code"; a lid_code of "" or "-" forces the other bucket.
std::map<std::string, std::string> load_alias_table(const std::filesystem::path& csv_path);

LanguageMapping build_language_mapping(const std::set<std::string>& lid_langs,
                                       const std::set<std::string>& meta_langs,
                                       const std::map<std::string, std::string>& alias_table);

// Concatenates each group's entries (lexicographic language order, then entry
// index), deduplicating; the result's entry indices are the binding indices
// for counting and balancing. The "other" key holds the other-bucket union.
std::map<std::string, MetadataEntrySet> merge_metadata_by_mapping(const MetadataCatalog& catalog,
                                                                  const LanguageMapping& mapping);

LidResult identify_language(std::string_view text, const LanguageClassifier& model);

// Writes lang into every record; confidence below the floor becomes "other".
void assign_languages(Shard& shard, const LanguageClassifier& model,
                      double confidence_floor = 0.0);

}  // namespace worldcurate
