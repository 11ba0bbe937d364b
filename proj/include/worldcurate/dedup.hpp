// Benchmark-leakage removal: embeddings from an external similarity model
// are reduced to 64-bit sign hashes via random projection; curated records
// whose hash lands within a Hamming radius of a benchmark hash are dropped.
// Also applies plain exclusion id-lists from external safety classifiers.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "worldcurate/corpus.hpp"

namespace worldcurate {

struct Projection {
    std::size_t dim = 0;
    std::vector<float> rows;  // 64 rows of standard normals, row-major
};

// Deterministic in (dim, seed).
Projection build_projection(std::size_t dim, std::uint64_t seed);

// Bit i set iff the i-th projection of v is >= 0.
std::uint64_t sign_hash(std::span<const float> v, const Projection& projection);

int hamming_distance(std::uint64_t a, std::uint64_t b);

struct EmbeddingFile {
    std::size_t dim = 0;
    std::vector<std::string> record_ids;
    std::vector<float> values;  // record_ids.size() x dim, row-major
};

// Binary header (magic, dim, count) + float32 LE rows; record ids live in
// the line-aligned sidecar "<path>.ids".
EmbeddingFile read_embeddings(const std::filesystem::path& path);
void write_embeddings(const EmbeddingFile& file, const std::filesystem::path& path);

std::unordered_map<std::string, std::uint64_t> hash_embeddings(const EmbeddingFile& file,
                                                               const Projection& projection);

// u64 LE values, one per line-aligned record id in "<path>.ids".
void write_hashes(const std::vector<std::pair<std::string, std::uint64_t>>& hashes,
                  const std::filesystem::path& path);
std::vector<std::pair<std::string, std::uint64_t>> read_hashes(const std::filesystem::path& path);
// Benchmark side needs no ids; reads the raw u64 array.
std::unordered_set<std::uint64_t> read_hash_set(const std::filesystem::path& path);

struct DedupStats {
    std::size_t removed = 0;
    std::size_t unhashed = 0;  // records kept without a hash (warned, not dropped)
};

std::vector<CuratedRecord> dedup_against_benchmark(
    std::vector<CuratedRecord> curated,
    const std::unordered_map<std::string, std::uint64_t>& curated_hashes,
    const std::unordered_set<std::uint64_t>& benchmark_hashes, int radius = 0,
    DedupStats* stats = nullptr);

std::unordered_set<std::string> read_id_list(const std::filesystem::path& path);
std::vector<CuratedRecord> apply_exclusion_list(std::vector<CuratedRecord> curated,
                                                const std::unordered_set<std::string>& excluded_ids,
                                                std::size_t* removed = nullptr);

}  // namespace worldcurate
