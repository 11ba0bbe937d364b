// Multi-pattern substring matching. A trie automaton with failure links
// answers "which metadata entries occur in this alt-text" in one pass; the
// brute-force scan is kept as the correctness oracle. Automata compile
// lazily per language and are cached for the life of the process.
#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "worldcurate/metadata.hpp"

namespace worldcurate {

struct MatchOptions {
    // When set, an occurrence only counts if it is not flanked by word
    // characters. Off by default: matching is raw substring containment.
    bool word_boundary = false;

    bool operator==(const MatchOptions&) const = default;
};

class PatternAutomaton {
public:
    // Entries are normalized before insertion (idempotent for already
    // normalized metadata); duplicates after normalization are an error.
    static PatternAutomaton compile(const MetadataEntrySet& entries, MatchOptions options = {});

    // Sorted unique entry indices whose pattern occurs in normalize(text).
    std::vector<std::uint32_t> match(std::string_view text) const;
    // Matching-only path over pre-normalized code points.
    std::vector<std::uint32_t> match_normalized(std::u32string_view text) const;

    const std::string& lang() const { return lang_; }
    std::size_t pattern_count() const { return pattern_count_; }
    const MatchOptions& options() const { return options_; }

    // On-disk cache entry keyed by (lang, metadata hash); versioned header.
    void save(const std::filesystem::path& path, std::string_view metadata_hash) const;
    static PatternAutomaton load(const std::filesystem::path& path,
                                 std::string_view expected_metadata_hash);

private:
    struct Node {
        std::vector<std::pair<char32_t, std::int32_t>> next;  // sorted by code point
        std::int32_t fail = 0;
        std::int32_t output_link = -1;  // nearest proper suffix ending a pattern
        std::int32_t pattern = -1;      // entry index ending at this node
    };

    std::int32_t find_next(std::int32_t node, char32_t c) const;
    std::int32_t insert_path(std::u32string_view pattern);
    void build_links();

    std::string lang_;
    MatchOptions options_;
    std::size_t pattern_count_ = 0;
    std::vector<Node> nodes_;
    std::vector<std::uint32_t> pattern_lengths_;  // in code points, for boundary checks
};

// Oracle: index i included iff entries[i] occurs in normalize(text).
std::vector<std::uint32_t> brute_force_match(std::string_view text, const MetadataEntrySet& entries,
                                             MatchOptions options = {});
// Matching-only path used by equivalence and throughput checks.
std::vector<std::uint32_t> brute_force_match_normalized(std::u32string_view text,
                                                        const std::vector<std::u32string>& patterns,
                                                        MatchOptions options = {});

// Compiles each language at most once per process (single-flight); lookups
// after the first return the identical automaton.
class AutomatonCache {
public:
    using Loader = std::function<MetadataEntrySet(const std::string& lang)>;

    explicit AutomatonCache(Loader loader, MatchOptions options = {});

    // Reuses serialized automata across runs, keyed by (lang, metadata hash).
    void enable_disk_cache(std::filesystem::path dir, std::string metadata_hash);

    std::shared_ptr<const PatternAutomaton> get_or_compile(const std::string& lang);

    // In-process compilations (disk-cache hits excluded).
    std::size_t compile_count() const { return compile_count_.load(); }

private:
    struct Slot {
        std::once_flag once;
        std::shared_ptr<const PatternAutomaton> automaton;
    };

    Loader loader_;
    MatchOptions options_;
    std::optional<std::filesystem::path> disk_dir_;
    std::string metadata_hash_;
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Slot>> slots_;
    std::atomic<std::size_t> compile_count_{0};
};

}  // namespace worldcurate
