// Orchestration: staged execution (lid, match-count, thresholds, curate,
// dedup) over sharded inputs with worker-pool parallelism, a reproducible
// run manifest, distribution reports, and the training-scale planner.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "worldcurate/balancing.hpp"
#include "worldcurate/counting.hpp"

namespace worldcurate {

inline constexpr const char* kToolVersion = "0.1.0";

struct DedupSettings {
    bool enabled = false;
    std::filesystem::path embeddings;        // "<path>" + "<path>.ids"
    std::filesystem::path benchmark_hashes;  // raw u64 LE values
    std::uint64_t seed = 0;
    int radius = 0;
};

struct PipelineConfig {
    std::filesystem::path metadata_dir;
    std::filesystem::path input_shards;
    std::filesystem::path work_dir;
    std::uint64_t t_en = 20000;
    std::uint64_t seed = 0;
    std::string lid_model = "none";     // "none" (langs pre-assigned) or "builtin"
    std::filesystem::path lid_profiles; // profile dir for the builtin classifier
    double lid_confidence_floor = 0.0;
    std::filesystem::path alias_table;  // empty = built-in defaults
    std::vector<std::string> extra_lid_languages;
    bool pin_t_en = false;
    bool force_global_t = false;
    bool word_boundary = false;
    std::filesystem::path automaton_cache;  // empty = no on-disk automata
    std::filesystem::path exclude_ids;      // external safety exclusion list
    DedupSettings dedup;
    std::size_t workers = 0;  // 0 = hardware concurrency; never part of the manifest
};

PipelineConfig load_config(const std::filesystem::path& json_path);
// Determinism-relevant fields only (worker count excluded).
nlohmann::json config_snapshot(const PipelineConfig& config);

struct RunManifest {
    nlohmann::json doc;
};

// Runs lid -> match-count -> thresholds -> curate -> dedup, writing stage
// outputs and manifest.json under work_dir. Outputs are byte-identical for
// a fixed (config, seed) regardless of worker count or shard order.
RunManifest run_pipeline(const PipelineConfig& config);

// Per-language CSV reports: count histograms, achieved vs target tail
// proportion, curated vs raw sizes, and expected vs actual head selections.
void report_stats(const std::filesystem::path& counts_dir,
                  const std::filesystem::path& thresholds_path,
                  const std::filesystem::path& annotated_dir,
                  const std::filesystem::path& curated_dir,
                  const std::filesystem::path& out_dir);

struct TrainingPlan {
    double english_share = 1.0;
    double scale_factor = 1.0;  // 1/english_share rounded to one decimal
    std::uint64_t base_batch = 0;
    std::uint64_t scaled_batch = 0;
    std::uint64_t base_seen_pairs = 0;
    std::uint64_t scaled_seen_pairs = 0;
};

// Holds English seen pairs constant as non-English data is added: the global
// batch and total seen pairs both scale by round(1/english_share, 1).
TrainingPlan plan_training(double english_share, std::uint64_t base_batch,
                           std::uint64_t base_seen_pairs);

// Worker count after applying the WORLDCURATE_WORKERS cap; 0 means auto.
std::size_t effective_workers(std::size_t configured);

// Runs fn(0..task_count) on a pool; rethrows the first task exception.
void parallel_for(std::size_t task_count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace worldcurate
