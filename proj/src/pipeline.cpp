#include "worldcurate/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <mutex>
#include <thread>

#include "worldcurate/dedup.hpp"
#include "worldcurate/errors.hpp"
#include "worldcurate/lid.hpp"
#include "worldcurate/unicode.hpp"

namespace worldcurate {

namespace {

using nlohmann::json;

const char* const kManifestFormat = "worldcurate-manifest-v1";

std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& value) {
    if (value.empty()) return {};
    std::filesystem::path p(value);
    return p.is_absolute() ? p : base / p;
}

void require_keys(const json& j, std::initializer_list<const char*> known,
                  const std::string& context) {
    for (const auto& [key, value] : j.items()) {
        if (std::find_if(known.begin(), known.end(),
                         [&](const char* k) { return key == k; }) == known.end()) {
            throw ValidationError("unknown config key \"" + key + "\" in " + context);
        }
    }
}

}  // namespace

PipelineConfig load_config(const std::filesystem::path& json_path) {
    std::ifstream in(json_path, std::ios::binary);
    if (!in) throw IoError("cannot open config file: " + json_path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ValidationError(json_path.string() + ": " + e.what());
    }
    require_keys(j,
                 {"metadata_dir", "input_shards", "work_dir", "t_en", "seed", "lid_model",
                  "lid_profiles", "lid_confidence_floor", "alias_table", "extra_lid_languages",
                  "pin_t_en", "force_global_t", "word_boundary", "automaton_cache", "exclude_ids",
                  "dedup", "workers"},
                 json_path.string());

    const auto base = json_path.has_parent_path() ? json_path.parent_path()
                                                  : std::filesystem::path(".");
    PipelineConfig c;
    c.metadata_dir = resolve_path(base, j.at("metadata_dir").get<std::string>());
    c.input_shards = resolve_path(base, j.at("input_shards").get<std::string>());
    c.work_dir = resolve_path(base, j.at("work_dir").get<std::string>());
    c.t_en = j.value("t_en", std::uint64_t{20000});
    c.seed = j.value("seed", std::uint64_t{0});
    c.lid_model = j.value("lid_model", std::string("none"));
    c.lid_profiles = resolve_path(base, j.value("lid_profiles", std::string()));
    c.lid_confidence_floor = j.value("lid_confidence_floor", 0.0);
    c.alias_table = resolve_path(base, j.value("alias_table", std::string()));
    if (j.contains("extra_lid_languages")) {
        c.extra_lid_languages = j.at("extra_lid_languages").get<std::vector<std::string>>();
    }
    c.pin_t_en = j.value("pin_t_en", false);
    c.force_global_t = j.value("force_global_t", false);
    c.word_boundary = j.value("word_boundary", false);
    c.automaton_cache = resolve_path(base, j.value("automaton_cache", std::string()));
    c.exclude_ids = resolve_path(base, j.value("exclude_ids", std::string()));
    if (j.contains("dedup")) {
        const json& d = j.at("dedup");
        require_keys(d, {"enabled", "embeddings", "benchmark_hashes", "seed", "radius"},
                     json_path.string() + " dedup section");
        c.dedup.enabled = d.value("enabled", false);
        c.dedup.embeddings = resolve_path(base, d.value("embeddings", std::string()));
        c.dedup.benchmark_hashes = resolve_path(base, d.value("benchmark_hashes", std::string()));
        c.dedup.seed = d.value("seed", std::uint64_t{0});
        c.dedup.radius = d.value("radius", 0);
    }
    c.workers = j.value("workers", std::size_t{0});
    return c;
}

json config_snapshot(const PipelineConfig& c) {
    return json{
        {"metadata_dir", c.metadata_dir.string()},
        {"input_shards", c.input_shards.string()},
        {"work_dir", c.work_dir.string()},
        {"t_en", c.t_en},
        {"seed", c.seed},
        {"lid_model", c.lid_model},
        {"lid_profiles", c.lid_profiles.string()},
        {"lid_confidence_floor", c.lid_confidence_floor},
        {"alias_table", c.alias_table.string()},
        {"extra_lid_languages", c.extra_lid_languages},
        {"pin_t_en", c.pin_t_en},
        {"force_global_t", c.force_global_t},
        {"word_boundary", c.word_boundary},
        {"exclude_ids", c.exclude_ids.string()},
        {"dedup",
         {{"enabled", c.dedup.enabled},
          {"embeddings", c.dedup.embeddings.string()},
          {"benchmark_hashes", c.dedup.benchmark_hashes.string()},
          {"seed", c.dedup.seed},
          {"radius", c.dedup.radius}}},
    };
}

std::size_t effective_workers(std::size_t configured) {
    std::size_t w = configured != 0 ? configured : std::thread::hardware_concurrency();
    if (w == 0) w = 1;
    if (const char* env = std::getenv("WORLDCURATE_WORKERS")) {
        std::size_t cap = 0;
        try {
            cap = std::stoull(env);
        } catch (const std::exception&) {
            throw ValidationError("WORLDCURATE_WORKERS must be a positive integer");
        }
        if (cap == 0) throw ValidationError("WORLDCURATE_WORKERS must be a positive integer");
        w = std::min(w, cap);
    }
    return w;
}

void parallel_for(std::size_t task_count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
    workers = std::min(effective_workers(workers), std::max<std::size_t>(task_count, 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < task_count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> cancelled{false};
    std::mutex error_mutex;
    std::exception_ptr first_error;

    auto worker = [&] {
        while (!cancelled.load()) {
            const std::size_t i = next.fetch_add(1);
            if (i >= task_count) break;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                cancelled.store(true);
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

namespace {

struct ShardTask {
    std::uint32_t id = 0;
    std::filesystem::path path;
};

void write_json_file(const json& doc, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << doc.dump(2) << '\n';
    out.flush();
    if (!out) throw IoError("write failure on " + path.string());
}

}  // namespace

RunManifest run_pipeline(const PipelineConfig& config) {
    std::filesystem::create_directories(config.work_dir);
    const auto lid_dir = config.work_dir / "lid";
    const auto annotated_dir = config.work_dir / "annotated";
    const auto counts_dir = config.work_dir / "counts";
    const auto curated_dir = config.work_dir / "curated";
    const auto final_dir = config.work_dir / "final";
    const auto thresholds_path = config.work_dir / "thresholds.json";
    const auto manifest_path = config.work_dir / "manifest.json";

    json manifest = {
        {"format", kManifestFormat},
        {"tool_version", kToolVersion},
        {"status", "incomplete"},
        {"config", config_snapshot(config)},
        {"seed", config.seed},
        {"t_en", config.t_en},
        {"stages", json::object()},
    };
    std::string current_stage = "setup";

    try {
        MetadataCatalog catalog = load_catalog(config.metadata_dir);
        if (catalog.by_lang.empty()) {
            throw ValidationError("no metadata entry sets under " + config.metadata_dir.string());
        }
        std::map<std::string, std::string> aliases = config.alias_table.empty()
                                                         ? default_alias_table()
                                                         : load_alias_table(config.alias_table);
        // Default aliases may reference languages absent from this catalog.
        for (auto it = aliases.begin(); it != aliases.end();) {
            if (!catalog.by_lang.count(it->first)) {
                it = aliases.erase(it);
            } else {
                ++it;
            }
        }

        std::unique_ptr<LanguageClassifier> classifier;
        if (config.lid_model == "builtin") {
            classifier = std::make_unique<NgramProfileClassifier>(
                NgramProfileClassifier::load(config.lid_profiles));
        } else if (config.lid_model != "none") {
            throw ValidationError("unknown lid_model \"" + config.lid_model +
                                  "\"; expected \"none\" or \"builtin\"");
        }

        std::set<std::string> meta_langs;
        for (const auto& [lang, set] : catalog.by_lang) meta_langs.insert(lang);
        std::set<std::string> lid_langs =
            classifier ? classifier->supported_langs() : meta_langs;
        for (const std::string& l : config.extra_lid_languages) {
            require_language_code(l);
            lid_langs.insert(l);
        }
        for (const auto& [meta, lid] : aliases) {
            // An alias target must exist as a LID class to receive its group.
            if (!lid.empty() && lid != "-") lid_langs.insert(lid);
        }

        LanguageMapping mapping = build_language_mapping(lid_langs, meta_langs, aliases);
        std::map<std::string, MetadataEntrySet> merged =
            merge_metadata_by_mapping(catalog, mapping);
        const std::string metadata_hash = metadata_content_hash(merged);
        manifest["metadata_hash"] = metadata_hash;
        json language_sizes = json::object();
        for (const auto& [lang, set] : merged) language_sizes[lang] = set.entries.size();
        manifest["languages"] = language_sizes;

        std::vector<ShardTask> shards;
        for (const auto& [id, path] : list_shard_files(config.input_shards)) {
            shards.push_back({id, path});
        }
        if (shards.empty()) {
            throw ValidationError("no input shards under " + config.input_shards.string());
        }

        // Stage: lid.
        current_stage = "lid";
        std::filesystem::create_directories(lid_dir);
        std::vector<std::uint64_t> lid_records(shards.size(), 0);
        parallel_for(shards.size(), config.workers, [&](std::size_t i) {
            Shard shard = read_shard(shards[i].path);
            shard.shard_id = shards[i].id;
            if (classifier) {
                assign_languages(shard, *classifier, config.lid_confidence_floor);
            } else {
                for (const AltTextRecord& r : shard.records) {
                    if (!r.lang) {
                        throw ValidationError("record \"" + r.record_id +
                                              "\" has no lang and lid_model is \"none\"");
                    }
                }
            }
            lid_records[i] = shard.records.size();
            write_shard(shard, lid_dir / shard_filename(shard.shard_id));
        });
        std::uint64_t total_records = 0;
        for (std::uint64_t n : lid_records) total_records += n;
        manifest["stages"]["lid"] = {{"shards", shards.size()}, {"records", total_records}};

        // Stage: match-count.
        current_stage = "match_count";
        std::filesystem::create_directories(annotated_dir);
        AutomatonCache cache(
            [&merged](const std::string& lang) {
                auto it = merged.find(lang);
                if (it == merged.end()) {
                    throw ValidationError("language \"" + lang +
                                          "\" is not a key of the metadata dictionary");
                }
                return it->second;
            },
            MatchOptions{config.word_boundary});
        if (!config.automaton_cache.empty()) {
            cache.enable_disk_cache(config.automaton_cache, metadata_hash);
        }
        std::vector<EntryCountTable> partials(shards.size());
        parallel_for(shards.size(), config.workers, [&](std::size_t i) {
            Shard shard = read_shard(lid_dir / shard_filename(shards[i].id));
            CountShardResult result = count_shard(shard, cache, metadata_hash);
            write_shard(result.annotated, annotated_dir / shard_filename(shards[i].id));
            partials[i] = std::move(result.partial);
        });
        EntryCountTable counts;
        counts.metadata_hash = metadata_hash;
        for (const EntryCountTable& partial : partials) counts = merge_counts(counts, partial);
        ensure_languages(counts, merged);
        persist_counts(counts, counts_dir);
        std::uint64_t total_matches = 0;
        for (const auto& [lang, vec] : counts.per_lang) {
            for (std::uint64_t v : vec) total_matches += v;
        }
        manifest["stages"]["match_count"] = {{"records", counts.total_records},
                                             {"total_matches", total_matches}};

        // Stage: thresholds.
        current_stage = "thresholds";
        ThresholdTable thresholds = compute_thresholds(
            counts, config.t_en,
            ThresholdOptions{config.pin_t_en, config.force_global_t});
        save_thresholds(thresholds, thresholds_path);
        manifest["p"] = thresholds.p;
        json per_lang_t = json::object();
        for (const auto& [lang, t] : thresholds.per_lang_t) per_lang_t[lang] = t;
        manifest["per_lang_t"] = per_lang_t;
        manifest["stages"]["thresholds"] = {{"languages", thresholds.per_lang_t.size()}};

        // Stage: curate. Probabilities come off the persisted counts through
        // mmap so the full per-language tables never sit in memory at once.
        current_stage = "curate";
        std::filesystem::create_directories(curated_dir);
        ProbabilityTable probs =
            compute_probability_table(MappedCounts::open(counts_dir), thresholds);
        std::vector<std::uint64_t> curated_counts(shards.size(), 0);
        parallel_for(shards.size(), config.workers, [&](std::size_t i) {
            Shard shard = read_shard(annotated_dir / shard_filename(shards[i].id));
            std::vector<CuratedRecord> curated =
                curate_shard(shard, probs, CurationSeed{config.seed});
            curated_counts[i] = curated.size();
            write_curated(curated, curated_dir / curated_filename(shards[i].id));
        });
        std::uint64_t total_curated = 0;
        for (std::uint64_t n : curated_counts) total_curated += n;
        manifest["stages"]["curate"] = {{"records_in", total_records},
                                        {"curated", total_curated}};

        // Stage: dedup (benchmark hashes and/or external exclusion list).
        const bool have_exclusions = !config.exclude_ids.empty();
        if (config.dedup.enabled || have_exclusions) {
            current_stage = "dedup";
            std::filesystem::create_directories(final_dir);
            std::unordered_set<std::string> excluded;
            if (have_exclusions) excluded = read_id_list(config.exclude_ids);
            std::unordered_map<std::string, std::uint64_t> curated_hashes;
            std::unordered_set<std::uint64_t> benchmark;
            if (config.dedup.enabled) {
                EmbeddingFile embeddings = read_embeddings(config.dedup.embeddings);
                Projection projection = build_projection(embeddings.dim, config.dedup.seed);
                curated_hashes = hash_embeddings(embeddings, projection);
                benchmark = read_hash_set(config.dedup.benchmark_hashes);
            }
            std::vector<DedupStats> dedup_stats(shards.size());
            std::vector<std::uint64_t> excluded_counts(shards.size(), 0);
            std::vector<std::uint64_t> final_counts(shards.size(), 0);
            parallel_for(shards.size(), config.workers, [&](std::size_t i) {
                std::vector<CuratedRecord> records =
                    read_curated(curated_dir / curated_filename(shards[i].id));
                std::size_t dropped = 0;
                records = apply_exclusion_list(std::move(records), excluded, &dropped);
                excluded_counts[i] = dropped;
                if (config.dedup.enabled) {
                    records = dedup_against_benchmark(std::move(records), curated_hashes,
                                                      benchmark, config.dedup.radius,
                                                      &dedup_stats[i]);
                }
                final_counts[i] = records.size();
                write_curated(records, final_dir / curated_filename(shards[i].id));
            });
            DedupStats combined;
            std::uint64_t total_excluded = 0;
            std::uint64_t total_final = 0;
            for (std::size_t i = 0; i < shards.size(); ++i) {
                combined.removed += dedup_stats[i].removed;
                combined.unhashed += dedup_stats[i].unhashed;
                total_excluded += excluded_counts[i];
                total_final += final_counts[i];
            }
            manifest["stages"]["dedup"] = {
                {"enabled", config.dedup.enabled},      {"records_in", total_curated},
                {"removed_benchmark", combined.removed}, {"removed_excluded", total_excluded},
                {"unhashed", combined.unhashed},         {"records_out", total_final},
            };
            manifest["output_dir"] = "final";
        } else {
            manifest["output_dir"] = "curated";
        }

        manifest["status"] = "complete";
        write_json_file(manifest, manifest_path);
    } catch (...) {
        manifest["status"] = "failed";
        manifest["failed_stage"] = current_stage;
        try {
            write_json_file(manifest, manifest_path);
        } catch (...) {
            // Original error wins.
        }
        throw;
    }
    return RunManifest{std::move(manifest)};
}

namespace {

struct LangStats {
    std::uint64_t raw_records = 0;
    std::uint64_t curated_records = 0;
    std::map<std::uint32_t, std::uint64_t> selected_by_entry;
};

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace

void report_stats(const std::filesystem::path& counts_dir,
                  const std::filesystem::path& thresholds_path,
                  const std::filesystem::path& annotated_dir,
                  const std::filesystem::path& curated_dir, const std::filesystem::path& out_dir) {
    EntryCountTable counts = load_counts(counts_dir);
    ThresholdTable thresholds = load_thresholds(thresholds_path);
    std::filesystem::create_directories(out_dir);

    std::map<std::string, LangStats> stats;
    for (const auto& [id, path] : list_shard_files(annotated_dir)) {
        Shard shard = read_shard(path);
        for (const AltTextRecord& r : shard.records) {
            if (r.lang) ++stats[*r.lang].raw_records;
        }
    }
    for (const auto& [id, path] : list_shard_files(curated_dir)) {
        for (const CuratedRecord& c : read_curated(path)) {
            if (!c.record.lang) continue;
            LangStats& s = stats[*c.record.lang];
            ++s.curated_records;
            ++s.selected_by_entry[c.selected_by_entry];
        }
    }

    std::ofstream summary(out_dir / "summary.csv", std::ios::binary | std::ios::trunc);
    if (!summary) throw IoError("cannot write stats summary");
    summary << "lang,entries,total_matches,t_lang,target_p,achieved_tail_proportion,"
               "raw_records,curated_records,curated_ratio\n";
    for (const auto& [lang, vec] : counts.per_lang) {
        std::uint64_t total = 0;
        for (std::uint64_t v : vec) total += v;
        const LangStats& s = stats.count(lang) ? stats.at(lang) : LangStats{};
        summary << lang << ',' << vec.size() << ',' << total << ',';
        auto t_it = thresholds.per_lang_t.find(lang);
        if (t_it != thresholds.per_lang_t.end()) {
            summary << t_it->second << ',' << format_double(thresholds.p) << ','
                    << format_double(t_to_p(t_it->second, vec));
        } else {
            summary << "," << format_double(thresholds.p) << ',';
        }
        summary << ',' << s.raw_records << ',' << s.curated_records << ',';
        if (s.raw_records > 0) {
            summary << format_double(static_cast<double>(s.curated_records) /
                                     static_cast<double>(s.raw_records));
        }
        summary << '\n';
    }
    summary.flush();
    if (!summary) throw IoError("write failure on stats summary");

    for (const auto& [lang, vec] : counts.per_lang) {
        // Count histogram in power-of-two buckets.
        std::map<std::pair<std::uint64_t, std::uint64_t>, std::pair<std::uint64_t, std::uint64_t>>
            buckets;
        for (std::uint64_t v : vec) {
            std::pair<std::uint64_t, std::uint64_t> bucket{0, 0};
            if (v > 0) {
                std::uint64_t lo = 1;
                while (lo * 2 <= v) lo *= 2;
                bucket = {lo, lo * 2 - 1};
            }
            auto& cell = buckets[bucket];
            cell.first += 1;
            cell.second += v;
        }
        std::ofstream hist(out_dir / (lang + ".hist.csv"), std::ios::binary | std::ios::trunc);
        if (!hist) throw IoError("cannot write histogram for " + lang);
        hist << "count_bucket_lo,count_bucket_hi,entries,total_count\n";
        for (const auto& [range, cell] : buckets) {
            hist << range.first << ',' << range.second << ',' << cell.first << ',' << cell.second
                 << '\n';
        }

        auto t_it = thresholds.per_lang_t.find(lang);
        if (t_it == thresholds.per_lang_t.end()) continue;
        const std::uint64_t t = t_it->second;
        std::vector<double> probs = compute_entry_probs(vec, t);
        const LangStats& s = stats.count(lang) ? stats.at(lang) : LangStats{};
        std::ofstream head(out_dir / (lang + ".head.csv"), std::ios::binary | std::ios::trunc);
        if (!head) throw IoError("cannot write head report for " + lang);
        head << "entry_index,count,prob,expected_selections,actual_selections\n";
        for (std::size_t i = 0; i < vec.size(); ++i) {
            if (vec[i] < t) continue;  // tail entries are always kept; nothing to audit
            auto sel = s.selected_by_entry.find(static_cast<std::uint32_t>(i));
            head << i << ',' << vec[i] << ',' << format_double(probs[i]) << ','
                 << format_double(probs[i] * static_cast<double>(vec[i])) << ','
                 << (sel == s.selected_by_entry.end() ? 0 : sel->second) << '\n';
        }
    }
}

TrainingPlan plan_training(double english_share, std::uint64_t base_batch,
                           std::uint64_t base_seen_pairs) {
    if (!(english_share > 0.0)) throw ValidationError("english_share must be > 0");
    if (english_share > 1.0) throw ValidationError("english_share must be <= 1");
    // One-decimal rounding reproduces the published 2.3x batch scaling;
    // integer tenths keep the arithmetic exact.
    const auto tenths = static_cast<std::uint64_t>(std::llround(10.0 / english_share));
    TrainingPlan plan;
    plan.english_share = english_share;
    plan.scale_factor = static_cast<double>(tenths) / 10.0;
    plan.base_batch = base_batch;
    plan.scaled_batch = base_batch * tenths / 10;
    plan.base_seen_pairs = base_seen_pairs;
    plan.scaled_seen_pairs = base_seen_pairs * tenths / 10;
    return plan;
}

}  // namespace worldcurate
