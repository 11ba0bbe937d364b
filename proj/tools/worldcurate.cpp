// worldcurate CLI: build-metadata, lid, match-count, thresholds, curate,
// dedup, stats, plan-training, run.
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "worldcurate/balancing.hpp"
#include "worldcurate/corpus.hpp"
#include "worldcurate/counting.hpp"
#include "worldcurate/dedup.hpp"
#include "worldcurate/errors.hpp"
#include "worldcurate/lid.hpp"
#include "worldcurate/matcher.hpp"
#include "worldcurate/metadata.hpp"
#include "worldcurate/pipeline.hpp"

namespace wc = worldcurate;

namespace {

struct BuildMetadataArgs {
    std::string lang;
    std::string lexicon;
    std::string corpus;
    std::string titles;
    std::uint64_t unigram_cap = 0;  // 0 = unbounded
    std::uint64_t bigram_cap = 0;
    std::uint64_t title_cap = 0;
    std::string out;
};

// Titles file: "title<TAB>clicks", one per line.
std::vector<std::pair<std::string, std::uint64_t>> read_titles(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw wc::IoError("cannot open titles file: " + path);
    std::vector<std::pair<std::string, std::uint64_t>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) {
            throw wc::ParseError(path + ": expected title<TAB>clicks", lineno);
        }
        std::uint64_t clicks = 0;
        try {
            clicks = std::stoull(line.substr(tab + 1));
        } catch (const std::exception&) {
            throw wc::ParseError(path + ": bad click count", lineno);
        }
        out.emplace_back(line.substr(0, tab), clicks);
    }
    return out;
}

void run_build_metadata(const BuildMetadataArgs& args) {
    wc::TokenizerRegistry registry;
    std::vector<std::string> lexicon;
    if (!args.lexicon.empty()) lexicon = wc::ingest_lexicon_file(args.lexicon, args.lang);

    wc::NgramCounter unigrams{args.lang, 1, {}};
    wc::NgramCounter bigrams{args.lang, 2, {}};
    if (!args.corpus.empty()) {
        std::ifstream corpus1(args.corpus, std::ios::binary);
        if (!corpus1) throw wc::IoError("cannot open corpus file: " + args.corpus);
        unigrams = wc::count_ngrams(corpus1, args.lang, 1, registry);
        std::ifstream corpus2(args.corpus, std::ios::binary);
        bigrams = wc::count_ngrams(corpus2, args.lang, 2, registry);
    }

    std::vector<std::string> titles;
    if (!args.titles.empty()) titles = wc::rank_titles(read_titles(args.titles));

    wc::SourceCaps caps;
    if (args.unigram_cap > 0) caps.unigram = args.unigram_cap;
    if (args.bigram_cap > 0) caps.bigram = args.bigram_cap;
    if (args.title_cap > 0) caps.title = args.title_cap;

    wc::MetadataEntrySet set =
        wc::build_metadata(args.lang, lexicon, unigrams, bigrams, titles, caps);
    wc::save_entry_set(set, args.out);
    std::cout << args.lang << ": " << set.entries.size() << " entries\n";
}

void for_each_listed_shard(const std::string& in_dir,
                           const std::function<void(std::uint32_t, const std::filesystem::path&)>& fn) {
    for (const auto& [id, path] : wc::list_shard_files(in_dir)) fn(id, path);
}

int dispatch(int argc, char** argv) {
    CLI::App app{"Worldwide image-text data curation"};
    app.require_subcommand(1);

    // build-metadata
    BuildMetadataArgs bm;
    auto* build = app.add_subcommand("build-metadata", "Build one language's metadata entry list");
    build->add_option("--lang", bm.lang, "Language code")->required();
    build->add_option("--lexicon", bm.lexicon, "Lexicon file, one synset per line");
    build->add_option("--corpus", bm.corpus, "Plain-text corpus, one document per line");
    build->add_option("--titles", bm.titles, "Title traffic file: title<TAB>clicks");
    build->add_option("--unigram-cap", bm.unigram_cap, "Top-N unigrams (0 = unbounded)");
    build->add_option("--bigram-cap", bm.bigram_cap, "Top-N bigrams (0 = unbounded)");
    build->add_option("--title-cap", bm.title_cap, "Top-N titles (0 = unbounded)");
    build->add_option("--out", bm.out, "Output metadata directory")->required();

    // lid
    std::string lid_model, lid_profiles, lid_in, lid_out;
    double lid_floor = 0.0;
    auto* lid = app.add_subcommand("lid", "Assign a language to every record");
    lid->add_option("--model", lid_model,
                    "\"builtin\" (with --profiles) or a profile directory")->required();
    lid->add_option("--profiles", lid_profiles, "Profile directory for --model builtin");
    lid->add_option("--confidence-floor", lid_floor, "Below this confidence, assign \"other\"");
    lid->add_option("--in", lid_in, "Input shard directory")->required();
    lid->add_option("--out", lid_out, "Output shard directory")->required();

    // match-count
    std::string mc_metadata, mc_in, mc_out_shards, mc_out_counts, mc_alias, mc_auto_cache;
    std::vector<std::string> mc_extra_langs;
    bool mc_word_boundary = false;
    std::size_t mc_workers = 0;
    auto* mc = app.add_subcommand("match-count",
                                  "Substring-match records and count matches per entry");
    mc->add_option("--metadata", mc_metadata, "Metadata directory")->required();
    mc->add_option("--in", mc_in, "Input shard directory (langs assigned)")->required();
    mc->add_option("--out-shards", mc_out_shards, "Annotated shard directory")->required();
    mc->add_option("--out-counts", mc_out_counts, "Count table directory")->required();
    mc->add_option("--alias-table", mc_alias, "CSV meta_code,lid_code (default: built-in)");
    mc->add_option("--lid-languages", mc_extra_langs, "Extra LID codes to key the dictionary");
    mc->add_flag("--word-boundary", mc_word_boundary, "Require word boundaries around matches");
    mc->add_option("--automaton-cache", mc_auto_cache, "On-disk automaton cache directory");
    mc->add_option("--workers", mc_workers, "Worker threads (0 = auto)");

    // thresholds
    std::string th_counts, th_out;
    std::uint64_t th_t_en = 0;
    bool th_pin = false, th_force = false;
    auto* th = app.add_subcommand("thresholds", "Derive per-language head/tail thresholds");
    th->add_option("--counts", th_counts, "Count table directory")->required();
    th->add_option("--t-en", th_t_en, "English threshold")->required();
    th->add_flag("--pin-t-en", th_pin, "Keep t_en for English instead of recomputing");
    th->add_flag("--force-global-t", th_force, "Use t_en for every language (ablation mode)");
    th->add_option("--out", th_out, "Output thresholds.json")->required();

    // curate
    std::string cu_in, cu_thresholds, cu_counts, cu_out;
    std::uint64_t cu_seed = 0;
    std::size_t cu_workers = 0;
    auto* cu = app.add_subcommand("curate", "Sample the balanced curated set");
    cu->add_option("--in", cu_in, "Annotated shard directory")->required();
    cu->add_option("--thresholds", cu_thresholds, "thresholds.json")->required();
    cu->add_option("--counts", cu_counts, "Count table directory")->required();
    cu->add_option("--seed", cu_seed, "Curation seed")->required();
    cu->add_option("--out", cu_out, "Curated output directory")->required();
    cu->add_option("--workers", cu_workers, "Worker threads (0 = auto)");

    // dedup
    std::string dd_embeddings, dd_benchmark, dd_in, dd_out, dd_exclude;
    std::uint64_t dd_seed = 0;
    int dd_radius = 0;
    auto* dd = app.add_subcommand("dedup", "Remove benchmark overlap and excluded ids");
    dd->add_option("--embeddings", dd_embeddings, "Embedding file (with .ids sidecar)");
    dd->add_option("--benchmark-hashes", dd_benchmark, "Benchmark hash file (u64 LE)");
    dd->add_option("--seed", dd_seed, "Projection seed");
    dd->add_option("--radius", dd_radius, "Hamming radius (0 = exact match)");
    dd->add_option("--exclude-ids", dd_exclude, "Record-id exclusion list, one per line");
    dd->add_option("--in", dd_in, "Curated input directory")->required();
    dd->add_option("--out", dd_out, "Curated output directory")->required();

    // stats
    std::string st_counts, st_thresholds, st_annotated, st_curated, st_out;
    auto* st = app.add_subcommand("stats", "Write per-language distribution reports");
    st->add_option("--counts", st_counts, "Count table directory")->required();
    st->add_option("--thresholds", st_thresholds, "thresholds.json")->required();
    st->add_option("--annotated", st_annotated, "Annotated shard directory")->required();
    st->add_option("--curated", st_curated, "Curated directory")->required();
    st->add_option("--out", st_out, "Report output directory")->required();

    // plan-training
    double pt_share = 0.0;
    std::uint64_t pt_batch = 32768;
    double pt_seen = 12.8e9;
    std::string pt_out;
    auto* pt = app.add_subcommand("plan-training", "Scale batch and seen pairs for worldwide data");
    pt->add_option("--english-share", pt_share, "English fraction of training data")->required();
    pt->add_option("--base-batch", pt_batch, "English-only global batch size");
    pt->add_option("--base-seen-pairs", pt_seen, "English-only seen pairs");
    pt->add_option("--out", pt_out, "Optional JSON output path");

    // run
    std::string run_config;
    std::size_t run_workers = 0;
    bool run_has_seed = false, run_has_t_en = false;
    std::uint64_t run_seed = 0, run_t_en = 0;
    auto* run = app.add_subcommand("run", "Run the full pipeline from a config file");
    run->add_option("--config", run_config, "Pipeline config JSON")->required();
    run->add_option("--workers", run_workers, "Override worker count");
    run->add_option("--seed", run_seed, "Override curation seed")->each([&](const std::string&) {
        run_has_seed = true;
    });
    run->add_option("--t-en", run_t_en, "Override t_en")->each([&](const std::string&) {
        run_has_t_en = true;
    });

    CLI11_PARSE(app, argc, argv);

    if (build->parsed()) {
        run_build_metadata(bm);
        return 0;
    }

    if (lid->parsed()) {
        std::string profile_dir = lid_model == "builtin" ? lid_profiles : lid_model;
        if (profile_dir.empty()) {
            throw wc::ValidationError("--model builtin requires --profiles <dir>");
        }
        wc::NgramProfileClassifier classifier = wc::NgramProfileClassifier::load(profile_dir);
        std::filesystem::create_directories(lid_out);
        std::uint64_t total = 0;
        for_each_listed_shard(lid_in, [&](std::uint32_t id, const std::filesystem::path& path) {
            wc::Shard shard = wc::read_shard(path);
            shard.shard_id = id;
            wc::assign_languages(shard, classifier, lid_floor);
            total += shard.records.size();
            wc::write_shard(shard, std::filesystem::path(lid_out) / wc::shard_filename(id));
        });
        std::cout << "assigned languages to " << total << " records\n";
        return 0;
    }

    if (mc->parsed()) {
        wc::MetadataCatalog catalog = wc::load_catalog(mc_metadata);
        std::map<std::string, std::string> aliases =
            mc_alias.empty() ? wc::default_alias_table() : wc::load_alias_table(mc_alias);
        for (auto it = aliases.begin(); it != aliases.end();) {
            it = catalog.by_lang.count(it->first) ? std::next(it) : aliases.erase(it);
        }
        std::set<std::string> meta_langs;
        for (const auto& [lang, set] : catalog.by_lang) meta_langs.insert(lang);
        std::set<std::string> lid_langs = meta_langs;
        for (const std::string& l : mc_extra_langs) lid_langs.insert(l);
        for (const auto& [meta, target] : aliases) {
            if (!target.empty() && target != "-") lid_langs.insert(target);
        }
        wc::LanguageMapping mapping =
            wc::build_language_mapping(lid_langs, meta_langs, aliases);
        auto merged = wc::merge_metadata_by_mapping(catalog, mapping);
        const std::string hash = wc::metadata_content_hash(merged);

        wc::AutomatonCache cache(
            [&merged](const std::string& lang) {
                auto it = merged.find(lang);
                if (it == merged.end()) {
                    throw wc::ValidationError("language \"" + lang +
                                              "\" is not a key of the metadata dictionary");
                }
                return it->second;
            },
            wc::MatchOptions{mc_word_boundary});
        if (!mc_auto_cache.empty()) cache.enable_disk_cache(mc_auto_cache, hash);

        std::filesystem::create_directories(mc_out_shards);
        auto shard_list = wc::list_shard_files(mc_in);
        std::vector<wc::EntryCountTable> partials(shard_list.size());
        wc::parallel_for(shard_list.size(), mc_workers, [&](std::size_t i) {
            wc::Shard shard = wc::read_shard(shard_list[i].second);
            shard.shard_id = shard_list[i].first;
            wc::CountShardResult result = wc::count_shard(shard, cache, hash);
            wc::write_shard(result.annotated, std::filesystem::path(mc_out_shards) /
                                                  wc::shard_filename(shard.shard_id));
            partials[i] = std::move(result.partial);
        });
        wc::EntryCountTable counts;
        counts.metadata_hash = hash;
        for (const auto& partial : partials) counts = wc::merge_counts(counts, partial);
        wc::ensure_languages(counts, merged);
        wc::persist_counts(counts, mc_out_counts);
        std::cout << "counted " << counts.total_records << " records across "
                  << counts.per_lang.size() << " languages\n";
        return 0;
    }

    if (th->parsed()) {
        wc::EntryCountTable counts = wc::load_counts(th_counts);
        wc::ThresholdTable table = wc::compute_thresholds(
            counts, th_t_en, wc::ThresholdOptions{th_pin, th_force});
        wc::save_thresholds(table, th_out);
        std::cout << "p = " << table.p << ", thresholds for " << table.per_lang_t.size()
                  << " languages\n";
        return 0;
    }

    if (cu->parsed()) {
        wc::MappedCounts counts = wc::MappedCounts::open(cu_counts);
        wc::ThresholdTable thresholds = wc::load_thresholds(cu_thresholds);
        wc::ProbabilityTable probs = wc::compute_probability_table(counts, thresholds);
        std::filesystem::create_directories(cu_out);
        auto shard_list = wc::list_shard_files(cu_in);
        std::vector<std::uint64_t> kept(shard_list.size(), 0);
        wc::parallel_for(shard_list.size(), cu_workers, [&](std::size_t i) {
            wc::Shard shard = wc::read_shard(shard_list[i].second);
            shard.shard_id = shard_list[i].first;
            auto curated = wc::curate_shard(shard, probs, wc::CurationSeed{cu_seed});
            kept[i] = curated.size();
            wc::write_curated(curated, std::filesystem::path(cu_out) /
                                           wc::curated_filename(shard.shard_id));
        });
        std::uint64_t total = 0;
        for (std::uint64_t n : kept) total += n;
        std::cout << "curated " << total << " records\n";
        return 0;
    }

    if (dd->parsed()) {
        std::unordered_map<std::string, std::uint64_t> curated_hashes;
        std::unordered_set<std::uint64_t> benchmark;
        const bool hash_dedup = !dd_embeddings.empty();
        if (hash_dedup) {
            if (dd_benchmark.empty()) {
                throw wc::ValidationError("--embeddings requires --benchmark-hashes");
            }
            wc::EmbeddingFile embeddings = wc::read_embeddings(dd_embeddings);
            wc::Projection projection = wc::build_projection(embeddings.dim, dd_seed);
            curated_hashes = wc::hash_embeddings(embeddings, projection);
            benchmark = wc::read_hash_set(dd_benchmark);
        }
        std::unordered_set<std::string> excluded;
        if (!dd_exclude.empty()) excluded = wc::read_id_list(dd_exclude);

        std::filesystem::create_directories(dd_out);
        wc::DedupStats total_stats;
        std::uint64_t total_excluded = 0;
        for (const auto& [id, path] : wc::list_shard_files(dd_in)) {
            std::vector<wc::CuratedRecord> records = wc::read_curated(path);
            std::size_t dropped = 0;
            records = wc::apply_exclusion_list(std::move(records), excluded, &dropped);
            total_excluded += dropped;
            if (hash_dedup) {
                wc::DedupStats stats;
                records = wc::dedup_against_benchmark(std::move(records), curated_hashes,
                                                      benchmark, dd_radius, &stats);
                total_stats.removed += stats.removed;
                total_stats.unhashed += stats.unhashed;
            }
            wc::write_curated(records, std::filesystem::path(dd_out) / wc::curated_filename(id));
        }
        std::cout << "removed " << total_stats.removed << " benchmark overlaps, "
                  << total_excluded << " excluded ids";
        if (total_stats.unhashed > 0) {
            std::cout << " (warning: " << total_stats.unhashed << " records had no hash)";
        }
        std::cout << '\n';
        return 0;
    }

    if (st->parsed()) {
        wc::report_stats(st_counts, st_thresholds, st_annotated, st_curated, st_out);
        std::cout << "reports written to " << st_out << '\n';
        return 0;
    }

    if (pt->parsed()) {
        wc::TrainingPlan plan = wc::plan_training(pt_share, pt_batch,
                                                  static_cast<std::uint64_t>(pt_seen));
        nlohmann::json doc = {
            {"english_share", plan.english_share},
            {"scale_factor", plan.scale_factor},
            {"base_batch", plan.base_batch},
            {"scaled_batch", plan.scaled_batch},
            {"base_seen_pairs", plan.base_seen_pairs},
            {"scaled_seen_pairs", plan.scaled_seen_pairs},
        };
        std::cout << doc.dump(2) << '\n';
        if (!pt_out.empty()) {
            std::ofstream out(pt_out, std::ios::binary | std::ios::trunc);
            if (!out) throw wc::IoError("cannot write " + pt_out);
            out << doc.dump(2) << '\n';
        }
        return 0;
    }

    if (run->parsed()) {
        wc::PipelineConfig config = wc::load_config(run_config);
        if (run_workers != 0) config.workers = run_workers;
        if (run_has_seed) config.seed = run_seed;
        if (run_has_t_en) config.t_en = run_t_en;
        wc::RunManifest manifest = wc::run_pipeline(config);
        std::cout << "pipeline complete: "
                  << manifest.doc["stages"]["curate"]["curated"].get<std::uint64_t>()
                  << " curated records, p = " << manifest.doc["p"].get<double>() << '\n';
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const wc::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const wc::IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    }
}
