// Stages 2-3: thresholds and sampling. The English threshold fixes the tail
// proportion p; every language's threshold is then read back off its own
// count distribution so all languages keep the same tail share. Counts
// convert to per-entry sampling probabilities (tail kept, head downsampled)
// and records are drawn with a counter-based generator so results do not
// depend on shard order or worker count.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "worldcurate/corpus.hpp"
#include "worldcurate/counting.hpp"

namespace worldcurate {

// Fraction of total matches held by entries with count strictly below t.
double t_to_p(std::uint64_t t, std::span<const std::uint64_t> counts);

// Count value whose cumulative share is nearest p (first index on ties).
std::uint64_t p_to_t(double p, std::span<const std::uint64_t> counts);

struct ThresholdTable {
    std::uint64_t t_en = 0;
    double p = 0.0;
    std::map<std::string, std::uint64_t> per_lang_t;
    std::string metadata_hash;
    bool pinned_english = false;
    bool force_global_t = false;
};

struct ThresholdOptions {
    bool pin_english = false;     // keep t_en for "en" instead of recomputing it
    bool force_global_t = false;  // ablation mode: every language uses t_en
};

// Languages with no matches at all are omitted; no record can reference them.
ThresholdTable compute_thresholds(const EntryCountTable& counts, std::uint64_t t_en,
                                  ThresholdOptions options = {});

// Tail entries (count < t) get probability 1, head entries t/count.
std::vector<double> compute_entry_probs(std::span<const std::uint64_t> counts, std::uint64_t t);

struct ProbabilityTable {
    std::map<std::string, std::vector<double>> per_lang;
};

ProbabilityTable compute_probability_table(const EntryCountTable& counts,
                                           const ThresholdTable& thresholds);
// Page-on-demand variant: languages stream out of the mapped files one at a
// time instead of residing in memory together.
ProbabilityTable compute_probability_table(const MappedCounts& counts,
                                           const ThresholdTable& thresholds);

struct CurationSeed {
    std::uint64_t value = 0;
};

// Deterministic draw in [0,1) for a (seed, record, entry) triple.
double sample_draw(std::uint64_t seed, std::string_view record_id, std::uint32_t entry_id);

// Walks matched entries in ascending order, keeping the record at the first
// entry whose draw lands under its probability. Records without matches are
// never included.
std::vector<CuratedRecord> curate_shard(const Shard& annotated, const ProbabilityTable& probs,
                                        CurationSeed seed);

void save_thresholds(const ThresholdTable& table, const std::filesystem::path& path);
ThresholdTable load_thresholds(const std::filesystem::path& path);

}  // namespace worldcurate
