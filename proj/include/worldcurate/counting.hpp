// Stage 1: global match counting. Shards produce private partial tables
// that merge by element-wise sum; the final table persists as fixed-width
// little-endian u64 arrays readable through mmap without loading every
// language into memory.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "worldcurate/corpus.hpp"
#include "worldcurate/matcher.hpp"
#include "worldcurate/metadata.hpp"

namespace worldcurate {

struct EntryCountTable {
    std::map<std::string, std::vector<std::uint64_t>> per_lang;  // length = entry count of M[lang]
    std::string metadata_hash;
    std::uint64_t total_records = 0;

    bool operator==(const EntryCountTable&) const = default;
};

EntryCountTable zero_counts(const std::map<std::string, MetadataEntrySet>& merged,
                            std::string_view metadata_hash);

struct CountShardResult {
    Shard annotated;
    EntryCountTable partial;
};

// Annotates every record with matched_entry_ids and increments its
// language's counts once per (record, entry) pair.
CountShardResult count_shard(const Shard& shard, AutomatonCache& cache,
                             std::string_view metadata_hash);

// Element-wise sum; languages present in only one input are copied.
EntryCountTable merge_counts(const EntryCountTable& a, const EntryCountTable& b);

// Adds zero vectors for languages that no record ever used.
void ensure_languages(EntryCountTable& table, const std::map<std::string, MetadataEntrySet>& merged);

// <lang>.counts.u64le files plus counts.manifest.json.
void persist_counts(const EntryCountTable& table, const std::filesystem::path& dir);
EntryCountTable load_counts(const std::filesystem::path& dir);

// Read-only page-on-demand view of a persisted count directory.
class MappedCounts {
public:
    static MappedCounts open(const std::filesystem::path& dir);

    MappedCounts(MappedCounts&&) noexcept;
    MappedCounts& operator=(MappedCounts&&) noexcept;
    MappedCounts(const MappedCounts&) = delete;
    MappedCounts& operator=(const MappedCounts&) = delete;
    ~MappedCounts();

    std::uint64_t at(const std::string& lang, std::size_t index) const;
    std::span<const std::uint64_t> values(const std::string& lang) const;
    std::size_t size(const std::string& lang) const;
    std::vector<std::string> languages() const;
    const std::string& metadata_hash() const { return metadata_hash_; }
    std::uint64_t total_records() const { return total_records_; }

private:
    MappedCounts() = default;

    struct Mapping {
        void* addr = nullptr;
        std::size_t bytes = 0;
        std::size_t entries = 0;
    };

    const Mapping& mapping(const std::string& lang) const;

    std::map<std::string, Mapping> mappings_;
    std::string metadata_hash_;
    std::uint64_t total_records_ = 0;
};

}  // namespace worldcurate
