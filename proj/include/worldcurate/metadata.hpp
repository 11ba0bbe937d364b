// Per-language metadata construction from four sources: lexicon synsets,
// corpus unigrams/bigrams, and click-ranked titles.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace worldcurate {

bool is_valid_language_code(std::string_view code);  // [a-z_]{2,20}
void require_language_code(std::string_view code);   // throws ValidationError

enum SourceTag : std::uint8_t {
    kSourceLexicon = 1u << 0,
    kSourceUnigram = 1u << 1,
    kSourceBigram = 1u << 2,
    kSourceTitle = 1u << 3,
};

std::string source_tags_to_string(std::uint8_t tags);  // "lexicon|unigram"
std::uint8_t source_tags_from_string(std::string_view s);

// Ordered, deduplicated entry list for one language. Entry index is the
// stable identifier that count tables and probability tables key on.
struct MetadataEntrySet {
    std::string lang;
    std::vector<std::string> entries;        // normalized, unique, non-empty
    std::vector<std::uint8_t> source_tags;   // parallel to entries

    std::size_t size() const { return entries.size(); }
    bool operator==(const MetadataEntrySet&) const = default;
};

struct NgramCounter {
    std::string lang;
    int n = 1;  // 1 or 2; bigram keys are two tokens joined by one space
    std::unordered_map<std::string, std::uint64_t> counts;

    void merge(const NgramCounter& other);  // sums; lang and n must agree
};

// Word segmenters for scriptio-continua languages plug in here; everything
// else falls through to the default space/punctuation split.
class TokenizerRegistry {
public:
    using Segmenter = std::function<std::vector<std::string>(std::string_view)>;

    void register_segmenter(const std::string& lang, Segmenter fn);
    const Segmenter* find(const std::string& lang) const;

    // Wiki codes whose scripts need an external word segmenter.
    static const std::vector<std::string>& special_language_codes();

private:
    std::map<std::string, Segmenter> segmenters_;
};

std::vector<std::string> tokenize(std::string_view text, const std::string& lang,
                                  const TokenizerRegistry& registry);

// N-gram windows never span document boundaries.
NgramCounter count_ngrams(const std::vector<std::string>& documents, const std::string& lang,
                          int n, const TokenizerRegistry& registry);
// One document per line.
NgramCounter count_ngrams(std::istream& documents, const std::string& lang, int n,
                          const TokenizerRegistry& registry);

// Duplicates are merged by summing clicks; then descending clicks, ties by
// ascending title.
std::vector<std::string> rank_titles(std::vector<std::pair<std::string, std::uint64_t>> title_traffic);

// Normalized, deduplicated lines in first-seen order.
std::vector<std::string> ingest_lexicon(std::istream& in, const std::string& lang);
std::vector<std::string> ingest_lexicon_file(const std::filesystem::path& path,
                                             const std::string& lang);

struct SourceCaps {
    std::optional<std::size_t> unigram;  // nullopt = unbounded
    std::optional<std::size_t> bigram;
    std::optional<std::size_t> title;
};

// Union in source order (lexicon, unigrams, bigrams, titles); first
// occurrence fixes the index, tags accumulate across sources.
MetadataEntrySet build_metadata(const std::string& lang, const std::vector<std::string>& lexicon,
                                const NgramCounter& unigrams, const NgramCounter& bigrams,
                                const std::vector<std::string>& ranked_titles,
                                const SourceCaps& caps = {});

// <lang>.entries.txt (one entry per line; line number = entry index) plus
// <lang>.entries.meta.csv (entry_index, source_tags).
void save_entry_set(const MetadataEntrySet& set, const std::filesystem::path& dir);
MetadataEntrySet load_entry_set(const std::filesystem::path& dir, const std::string& lang);

struct MetadataCatalog {
    std::map<std::string, MetadataEntrySet> by_lang;
};

MetadataCatalog load_catalog(const std::filesystem::path& dir);

// Stable hash over (language, entry list) pairs; binds count tables and
// thresholds to the exact metadata they were computed from.
std::string metadata_content_hash(const std::map<std::string, MetadataEntrySet>& by_lang);

}  // namespace worldcurate
