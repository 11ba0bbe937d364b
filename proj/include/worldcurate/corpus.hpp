// Image-text record model and sharded JSONL I/O. Images are referenced by
// URI or content hash only; curation reads alt-text exclusively.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace worldcurate {

struct AltTextRecord {
    std::string record_id;
    std::string image_ref;
    std::string text;
    std::optional<std::string> lang;
    std::optional<std::vector<std::uint32_t>> matched_entry_ids;  // sorted, deduplicated
    nlohmann::json extra = nlohmann::json::object();              // unknown fields, kept on round-trip

    bool operator==(const AltTextRecord&) const = default;
};

struct Shard {
    std::uint32_t shard_id = 0;
    std::vector<AltTextRecord> records;  // input order preserved

    bool operator==(const Shard&) const = default;
};

struct CuratedRecord {
    AltTextRecord record;
    std::uint32_t selected_by_entry = 0;  // entry index that triggered inclusion
    double sample_draw = 0.0;             // unit-interval draw that decided it

    bool operator==(const CuratedRecord&) const = default;
};

enum class ShardFormat { jsonl };

// Shard id is taken from trailing digits in the file stem ("shard-00012"),
// falling back to 0 when absent.
Shard read_shard(const std::filesystem::path& path, ShardFormat format = ShardFormat::jsonl);
void write_shard(const Shard& shard, const std::filesystem::path& path);

std::vector<CuratedRecord> read_curated(const std::filesystem::path& path);
void write_curated(const std::vector<CuratedRecord>& records, const std::filesystem::path& path);

std::string shard_filename(std::uint32_t shard_id);    // shard-00042.jsonl
std::string curated_filename(std::uint32_t shard_id);  // curated-00042.jsonl

// All *.jsonl files in a directory, sorted by shard id. Files without digit
// stems get sequential ids by name order; colliding ids are an error.
std::vector<std::pair<std::uint32_t, std::filesystem::path>> list_shard_files(
    const std::filesystem::path& dir);

AltTextRecord record_from_json(const nlohmann::json& j);
nlohmann::json record_to_json(const AltTextRecord& r);

}  // namespace worldcurate
