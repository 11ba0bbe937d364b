#include "worldcurate/counting.hpp"

#include <random>

#include "doctest.h"
#include "test_util.hpp"
#include "worldcurate/errors.hpp"

using namespace worldcurate;
using wctest::TempDir;

namespace {

MetadataEntrySet entry_set(const std::string& lang, std::vector<std::string> entries) {
    MetadataEntrySet set;
    set.lang = lang;
    set.source_tags.assign(entries.size(), kSourceLexicon);
    set.entries = std::move(entries);
    return set;
}

std::map<std::string, MetadataEntrySet> two_lang_metadata() {
    std::map<std::string, MetadataEntrySet> m;
    m.emplace("en", entry_set("en", {"cat", "dog", "fish", "bird", "tree", "rock"}));
    m.emplace("de", entry_set("de", {"katze", "hund"}));
    m.emplace("other", entry_set("other", {}));
    return m;
}

AutomatonCache cache_over(const std::map<std::string, MetadataEntrySet>& m) {
    return AutomatonCache([&m](const std::string& lang) {
        auto it = m.find(lang);
        if (it == m.end()) throw ValidationError("no metadata for \"" + lang + "\"");
        return it->second;
    });
}

AltTextRecord rec(const std::string& id, const std::string& text, const std::string& lang) {
    return {id, "u://" + id, text, lang, std::nullopt};
}

}  // namespace

TEST_CASE("count_shard: one record matching two entries increments both once") {
    auto m = two_lang_metadata();
    auto cache = cache_over(m);
    Shard shard{0, {rec("r1", "a fish near a bird", "en")}};
    CountShardResult result = count_shard(shard, cache, "h");
    CHECK(result.annotated.records[0].matched_entry_ids == std::vector<std::uint32_t>{2, 3});
    CHECK(result.partial.per_lang.at("en") == std::vector<std::uint64_t>{0, 0, 1, 1, 0, 0});
    CHECK(result.partial.total_records == 1);
}

TEST_CASE("count_shard: repeated occurrences still increment once per record") {
    auto m = two_lang_metadata();
    auto cache = cache_over(m);
    Shard shard{0, {rec("r1", "cat cat cat", "en"), rec("r2", "a cat", "en")}};
    CountShardResult result = count_shard(shard, cache, "h");
    CHECK(result.partial.per_lang.at("en")[0] == 2);  // two records, not five occurrences
}

TEST_CASE("count_shard: no matches annotates an empty list") {
    auto m = two_lang_metadata();
    auto cache = cache_over(m);
    Shard shard{0, {rec("r1", "nothing relevant", "de")}};
    CountShardResult result = count_shard(shard, cache, "h");
    CHECK(result.annotated.records[0].matched_entry_ids == std::vector<std::uint32_t>{});
    CHECK(result.partial.per_lang.at("de") == std::vector<std::uint64_t>{0, 0});
}

TEST_CASE("count_shard: record without lang is pipeline misuse") {
    auto m = two_lang_metadata();
    auto cache = cache_over(m);
    Shard shard{0, {{"r1", "u", "text", std::nullopt, std::nullopt}}};
    CHECK_THROWS_AS(count_shard(shard, cache, "h"), ValidationError);
}

TEST_CASE("count_shard: unknown language propagates the loader error") {
    auto m = two_lang_metadata();
    auto cache = cache_over(m);
    Shard shard{0, {rec("r1", "text", "xx")}};
    CHECK_THROWS_AS(count_shard(shard, cache, "h"), ValidationError);
}

TEST_CASE("count_shard: empty alt-text can never match") {
    auto m = two_lang_metadata();
    auto cache = cache_over(m);
    Shard shard{0, {rec("r1", "", "en")}};
    CountShardResult result = count_shard(shard, cache, "h");
    CHECK(result.annotated.records[0].matched_entry_ids->empty());
}

TEST_CASE("idempotent re-annotation") {
    auto m = two_lang_metadata();
    auto cache = cache_over(m);
    Shard shard{0, {rec("r1", "cat and dog", "en"), rec("r2", "katze!", "de")}};
    CountShardResult first = count_shard(shard, cache, "h");
    CountShardResult second = count_shard(first.annotated, cache, "h");
    CHECK(second.annotated == first.annotated);
    CHECK(second.partial == first.partial);
}

TEST_CASE("merge_counts: identity, commutativity, copy of one-sided languages") {
    EntryCountTable zero;
    zero.metadata_hash = "h";
    EntryCountTable x;
    x.metadata_hash = "h";
    x.per_lang["en"] = {1, 2, 3};
    x.total_records = 4;

    CHECK(merge_counts(x, zero) == x);
    CHECK(merge_counts(zero, x) == x);

    EntryCountTable y;
    y.metadata_hash = "h";
    y.per_lang["en"] = {10, 0, 1};
    y.per_lang["de"] = {7};
    y.total_records = 2;
    CHECK(merge_counts(x, y) == merge_counts(y, x));
    EntryCountTable merged = merge_counts(x, y);
    CHECK(merged.per_lang.at("en") == std::vector<std::uint64_t>{11, 2, 4});
    CHECK(merged.per_lang.at("de") == std::vector<std::uint64_t>{7});
    CHECK(merged.total_records == 6);
}

TEST_CASE("merge_counts: metadata drift is detected") {
    EntryCountTable a;
    a.metadata_hash = "h1";
    a.per_lang["en"] = {1};
    EntryCountTable b;
    b.metadata_hash = "h2";
    b.per_lang["en"] = {1};
    CHECK_THROWS_AS(merge_counts(a, b), ValidationError);

    EntryCountTable c;
    c.metadata_hash = "h1";
    c.per_lang["en"] = {1, 2};  // wrong length
    CHECK_THROWS_AS(merge_counts(a, c), ValidationError);
}

TEST_CASE("sharded counting equals the sequential reference") {
    auto m = two_lang_metadata();
    std::mt19937_64 rng(5150);
    const std::vector<std::string> phrases = {"cat",  "dog and cat", "fish", "bird bird",
                                              "tree", "rock fish",   "none", "katze und hund"};
    std::vector<Shard> shards(10);
    Shard everything{0, {}};
    for (std::uint32_t s = 0; s < 10; ++s) {
        shards[s].shard_id = s;
        for (int i = 0; i < 40; ++i) {
            const std::string& text = phrases[rng() % phrases.size()];
            const std::string lang = text.find("katze") != std::string::npos ? "de" : "en";
            auto r = rec("s" + std::to_string(s) + "-" + std::to_string(i), text, lang);
            shards[s].records.push_back(r);
            everything.records.push_back(r);
        }
    }
    auto seq_cache = cache_over(m);
    EntryCountTable sequential = count_shard(everything, seq_cache, "h").partial;

    EntryCountTable merged;
    merged.metadata_hash = "h";
    auto shard_cache = cache_over(m);
    std::vector<EntryCountTable> partials;
    for (const Shard& s : shards) partials.push_back(count_shard(s, shard_cache, "h").partial);
    // Fold in a scrambled order; sums are order-free.
    std::shuffle(partials.begin(), partials.end(), rng);
    for (const auto& p : partials) merged = merge_counts(merged, p);

    CHECK(merged.per_lang == sequential.per_lang);
    CHECK(merged.total_records == sequential.total_records);
}

TEST_CASE("conservation: total counts equal total matched ids") {
    auto m = two_lang_metadata();
    auto cache = cache_over(m);
    Shard shard{0,
                {rec("r1", "cat dog fish", "en"), rec("r2", "bird", "en"),
                 rec("r3", "hund katze", "de"), rec("r4", "nothing", "en")}};
    CountShardResult result = count_shard(shard, cache, "h");
    std::uint64_t from_counts = 0;
    for (const auto& [lang, vec] : result.partial.per_lang) {
        for (std::uint64_t v : vec) from_counts += v;
    }
    std::uint64_t from_records = 0;
    for (const auto& r : result.annotated.records) from_records += r.matched_entry_ids->size();
    CHECK(from_counts == from_records);
    CHECK(from_counts == 6);
}

TEST_CASE("zero_counts and ensure_languages size vectors from the dictionary") {
    auto m = two_lang_metadata();
    EntryCountTable table = zero_counts(m, "h");
    CHECK(table.per_lang.at("en").size() == 6);
    CHECK(table.per_lang.at("other").empty());

    EntryCountTable partial;
    partial.metadata_hash = "h";
    partial.per_lang["en"] = {1, 0, 0, 0, 0, 2};
    ensure_languages(partial, m);
    CHECK(partial.per_lang.size() == 3);
    CHECK(partial.per_lang.at("de") == std::vector<std::uint64_t>{0, 0});
}

TEST_CASE("persist/load round trip, file arithmetic, and mmap access") {
    TempDir dir;
    EntryCountTable table;
    table.metadata_hash = "feedface00000000";
    table.total_records = 123;
    std::mt19937_64 rng(808);
    std::vector<std::uint64_t> big(1000);
    for (auto& v : big) v = rng() % 100000;
    table.per_lang["en"] = big;
    table.per_lang["ja"] = {0, 1, 2, 3};
    table.per_lang["empty_lang"] = {};
    persist_counts(table, dir.path());

    CHECK(std::filesystem::file_size(dir / "en.counts.u64le") == 8 * 1000);
    CHECK(std::filesystem::file_size(dir / "ja.counts.u64le") == 8 * 4);

    EntryCountTable loaded = load_counts(dir.path());
    CHECK(loaded == table);

    MappedCounts mapped = MappedCounts::open(dir.path());
    CHECK(mapped.metadata_hash() == table.metadata_hash);
    CHECK(mapped.total_records() == 123);
    CHECK(mapped.size("en") == 1000);
    for (int probe = 0; probe < 1000; ++probe) {
        const std::size_t i = rng() % big.size();
        CHECK(mapped.at("en", i) == big[i]);
    }
    CHECK(mapped.values("ja")[2] == 2);
    CHECK_THROWS_AS(mapped.at("en", 1000), ValidationError);
    CHECK_THROWS_AS(mapped.at("xx", 0), ValidationError);
}

TEST_CASE("load_counts: truncated file detected") {
    TempDir dir;
    EntryCountTable table;
    table.metadata_hash = "h";
    table.per_lang["en"] = {1, 2, 3};
    persist_counts(table, dir.path());
    // Chop the last byte off.
    auto path = dir / "en.counts.u64le";
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 1);
    CHECK_THROWS_AS(load_counts(dir.path()), ValidationError);
    CHECK_THROWS_AS(MappedCounts::open(dir.path()), ValidationError);
}
