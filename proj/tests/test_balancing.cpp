#include "worldcurate/balancing.hpp"

#include <cmath>
#include <random>

#include "doctest.h"
#include "test_util.hpp"
#include "worldcurate/errors.hpp"

using namespace worldcurate;
using wctest::TempDir;

namespace {

const std::vector<std::uint64_t> kFixture = {1, 2, 3, 4, 10};

AltTextRecord annotated(const std::string& id, const std::string& lang,
                        std::vector<std::uint32_t> ids) {
    return {id, "u://" + id, "text " + id, lang, std::move(ids)};
}

}  // namespace

TEST_CASE("t_to_p: hand-computed fixture values") {
    CHECK(t_to_p(4, kFixture) == 0.3);  // (1+2+3)/20, exact
    CHECK(t_to_p(1, kFixture) == 0.0);   // no count below 1
    CHECK(t_to_p(11, kFixture) == 1.0);  // everything is tail
    CHECK(t_to_p(10, kFixture) == 0.5);  // 10 itself is not strictly below
}

TEST_CASE("t_to_p: zero total is an error") {
    std::vector<std::uint64_t> zeros = {0, 0};
    CHECK_THROWS_AS(t_to_p(1, zeros), ValidationError);
    CHECK_THROWS_AS(t_to_p(1, std::vector<std::uint64_t>{}), ValidationError);
}

TEST_CASE("p_to_t: hand-computed fixture values") {
    // Cumulative probs over sorted [1,2,3,4,10]: 0.05 0.15 0.30 0.50 1.00.
    CHECK(p_to_t(0.3, kFixture) == 3);
    CHECK(p_to_t(1.0, kFixture) == 10);
    CHECK(p_to_t(0.0, kFixture) == 1);
}

TEST_CASE("p_to_t: first index wins ties") {
    // Cumulative probs over [1,1,2]: 0.25 0.50 1.00; p=0.375 ties 0.25/0.50.
    std::vector<std::uint64_t> counts = {1, 1, 2};
    CHECK(p_to_t(0.375, counts) == 1);
}

TEST_CASE("p_to_t: input order does not matter") {
    std::vector<std::uint64_t> shuffled = {10, 3, 1, 4, 2};
    CHECK(p_to_t(0.3, shuffled) == 3);
}

TEST_CASE("scale equivariance: k-fold counts give k-fold thresholds") {
    std::mt19937_64 rng(321);
    for (int trial = 0; trial < 50; ++trial) {
        // Plateau-free: strictly increasing counts.
        std::vector<std::uint64_t> counts;
        std::uint64_t v = 0;
        const std::size_t n = 3 + rng() % 20;
        for (std::size_t i = 0; i < n; ++i) {
            v += 1 + rng() % 50;
            counts.push_back(v);
        }
        const double p = static_cast<double>(rng() % 1000) / 1000.0;
        for (std::uint64_t k : {2, 3}) {
            std::vector<std::uint64_t> scaled;
            for (std::uint64_t c : counts) scaled.push_back(c * k);
            CHECK(p_to_t(p, scaled) == k * p_to_t(p, counts));
        }
    }
}

TEST_CASE("compute_thresholds: p from English, thresholds for every language") {
    EntryCountTable counts;
    counts.metadata_hash = "h";
    counts.per_lang["en"] = kFixture;
    counts.per_lang["xx"] = {2, 4, 6, 8, 20};  // en scaled by 2
    ThresholdTable table = compute_thresholds(counts, 4);
    CHECK(table.p == 0.3);
    CHECK(table.per_lang_t.at("xx") == 6);
    // English recomputes through p_to_t; count quantization may move it off t_en.
    CHECK(table.per_lang_t.at("en") == 3);
    CHECK(table.t_en == 4);
    CHECK(table.metadata_hash == "h");
}

TEST_CASE("compute_thresholds: pin_english keeps t_en for en") {
    EntryCountTable counts;
    counts.per_lang["en"] = kFixture;
    ThresholdTable table = compute_thresholds(counts, 4, {.pin_english = true});
    CHECK(table.per_lang_t.at("en") == 4);
    CHECK(table.pinned_english);
}

TEST_CASE("compute_thresholds: force_global_t applies t_en everywhere") {
    EntryCountTable counts;
    counts.per_lang["en"] = kFixture;
    counts.per_lang["xx"] = {2, 4, 6, 8, 20};
    ThresholdTable table = compute_thresholds(counts, 4, {.force_global_t = true});
    CHECK(table.per_lang_t.at("en") == 4);
    CHECK(table.per_lang_t.at("xx") == 4);
    CHECK(table.force_global_t);
}

TEST_CASE("compute_thresholds: missing English is an error") {
    EntryCountTable counts;
    counts.per_lang["de"] = {1, 2};
    CHECK_THROWS_AS(compute_thresholds(counts, 4), ValidationError);
}

TEST_CASE("compute_thresholds: languages with no matches are skipped") {
    EntryCountTable counts;
    counts.per_lang["en"] = kFixture;
    counts.per_lang["other"] = {};      // empty entry set
    counts.per_lang["quiet"] = {0, 0};  // entries exist, nothing matched
    ThresholdTable table = compute_thresholds(counts, 4);
    CHECK(table.per_lang_t.count("other") == 0);
    CHECK(table.per_lang_t.count("quiet") == 0);
    CHECK(table.per_lang_t.count("en") == 1);
}

TEST_CASE("round trip t -> p -> t differs only by count quantization") {
    std::mt19937_64 rng(654);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::uint64_t> counts;
        const std::size_t n = 5 + rng() % 30;
        for (std::size_t i = 0; i < n; ++i) counts.push_back(1 + rng() % 500);
        const std::uint64_t t = 1 + rng() % 500;
        const double p = t_to_p(t, counts);
        const std::uint64_t t_back = p_to_t(p, counts);
        // The recovered threshold keeps the tail proportion within one
        // entry's count mass of p.
        const double achieved = t_to_p(t_back, counts);
        std::uint64_t total = 0;
        std::uint64_t boundary_mass = 0;
        std::uint64_t next_above = 0;
        for (std::uint64_t c : counts) {
            total += c;
            if (c == t_back) boundary_mass += c;
            if (c > t_back && (next_above == 0 || c < next_above)) next_above = c;
        }
        const double tolerance =
            static_cast<double>(boundary_mass + next_above) / static_cast<double>(total);
        CHECK(std::abs(achieved - p) <= tolerance);
    }
}

TEST_CASE("compute_entry_probs: hand-computed fixture") {
    std::vector<double> probs = compute_entry_probs(kFixture, 3);
    REQUIRE(probs.size() == 5);
    CHECK(probs[0] == 1.0);
    CHECK(probs[1] == 1.0);
    CHECK(probs[2] == 1.0);  // count == t is head with prob t/t
    CHECK(probs[3] == 0.75);
    CHECK(probs[4] == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("compute_entry_probs: t at or above max keeps everything") {
    for (std::uint64_t t : {10, 11, 100}) {
        for (double p : compute_entry_probs(kFixture, t)) CHECK(p == 1.0);
    }
}

TEST_CASE("compute_entry_probs: zero-count entries clamp to probability 1") {
    std::vector<std::uint64_t> counts = {0, 5};
    std::vector<double> probs = compute_entry_probs(counts, 2);
    CHECK(probs[0] == 1.0);
    CHECK(probs[1] == 0.4);
}

TEST_CASE("monotone head downsampling: smaller t never raises a probability") {
    std::mt19937_64 rng(777);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<std::uint64_t> counts;
        const std::size_t n = 1 + rng() % 20;
        for (std::size_t i = 0; i < n; ++i) counts.push_back(rng() % 100);
        const std::uint64_t t_hi = 2 + rng() % 80;
        const std::uint64_t t_lo = 1 + rng() % (t_hi - 1);
        auto hi = compute_entry_probs(counts, t_hi);
        auto lo = compute_entry_probs(counts, t_lo);
        for (std::size_t i = 0; i < counts.size(); ++i) CHECK(lo[i] <= hi[i]);
    }
}

TEST_CASE("sample_draw: deterministic, unit interval, key-sensitive") {
    const double u = sample_draw(42, "record-1", 7);
    CHECK(u == sample_draw(42, "record-1", 7));
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(u != sample_draw(43, "record-1", 7));
    CHECK(u != sample_draw(42, "record-2", 7));
    CHECK(u != sample_draw(42, "record-1", 8));
}

TEST_CASE("curate: tail matches are always included via the smallest id") {
    ProbabilityTable probs;
    probs.per_lang["en"] = {1.0, 1.0, 0.5};
    Shard shard{0, {annotated("r1", "en", {1, 2})}};
    auto curated = curate_shard(shard, probs, CurationSeed{9});
    REQUIRE(curated.size() == 1);
    CHECK(curated[0].selected_by_entry == 1);  // first id with prob 1.0
    CHECK(curated[0].sample_draw < 1.0);
}

TEST_CASE("curate: no matches, never included") {
    ProbabilityTable probs;
    probs.per_lang["en"] = {1.0};
    Shard shard{0, {annotated("r1", "en", {}),
                    {"r2", "u", "no match annotation", std::string("en"), std::nullopt}}};
    CHECK(curate_shard(shard, probs, CurationSeed{9}).empty());
}

TEST_CASE("curate: missing probability entry is an error") {
    ProbabilityTable probs;
    probs.per_lang["en"] = {1.0};
    Shard wrong_lang{0, {annotated("r1", "de", {0})}};
    CHECK_THROWS_AS(curate_shard(wrong_lang, probs, CurationSeed{1}), ValidationError);
    Shard out_of_range{0, {annotated("r1", "en", {3})}};
    CHECK_THROWS_AS(curate_shard(out_of_range, probs, CurationSeed{1}), ValidationError);
}

TEST_CASE("curate: two 0.5 entries include the record 75% of the time") {
    ProbabilityTable probs;
    probs.per_lang["en"] = {0.5, 0.5};
    const int trials = 100000;
    Shard shard{0, {}};
    for (int i = 0; i < trials; ++i) {
        shard.records.push_back(annotated("r" + std::to_string(i), "en", {0, 1}));
    }
    auto curated = curate_shard(shard, probs, CurationSeed{20240811});
    const double frequency = static_cast<double>(curated.size()) / trials;
    CHECK(frequency == doctest::Approx(0.75).epsilon(0.0134));  // +-0.01 absolute
    CHECK(std::abs(frequency - 0.75) <= 0.01);
}

TEST_CASE("curate: deterministic in (records, probs, seed); seed changes membership") {
    ProbabilityTable probs;
    probs.per_lang["en"] = {0.5, 0.25};
    Shard shard{0, {}};
    for (int i = 0; i < 2000; ++i) {
        shard.records.push_back(annotated("r" + std::to_string(i), "en", {i % 2 == 0 ? 0u : 1u}));
    }
    auto a = curate_shard(shard, probs, CurationSeed{5});
    auto b = curate_shard(shard, probs, CurationSeed{5});
    CHECK(a == b);
    auto c = curate_shard(shard, probs, CurationSeed{6});
    CHECK(a != c);
}

TEST_CASE("curate: selection is independent of shard partitioning") {
    ProbabilityTable probs;
    probs.per_lang["en"] = {0.3};
    std::vector<AltTextRecord> records;
    for (int i = 0; i < 1000; ++i) {
        records.push_back(annotated("r" + std::to_string(i), "en", {0}));
    }
    Shard whole{0, records};
    auto all_at_once = curate_shard(whole, probs, CurationSeed{99});

    std::vector<CuratedRecord> pieces;
    for (std::size_t start = 0; start < records.size(); start += 100) {
        Shard piece{static_cast<std::uint32_t>(start / 100),
                    {records.begin() + start, records.begin() + start + 100}};
        auto part = curate_shard(piece, probs, CurationSeed{99});
        pieces.insert(pieces.end(), part.begin(), part.end());
    }
    CHECK(all_at_once == pieces);
}

TEST_CASE("tail preservation: any tail entry guarantees inclusion") {
    std::mt19937_64 rng(2024);
    ProbabilityTable probs;
    probs.per_lang["en"] = {0.1, 1.0, 0.05, 1.0};  // entries 1 and 3 are tail
    Shard shard{0, {}};
    for (int i = 0; i < 500; ++i) {
        std::vector<std::uint32_t> ids;
        for (std::uint32_t e = 0; e < 4; ++e) {
            if (rng() % 2) ids.push_back(e);
        }
        if (std::find(ids.begin(), ids.end(), 1u) == ids.end() &&
            std::find(ids.begin(), ids.end(), 3u) == ids.end()) {
            ids.push_back(3);  // ensure a tail entry
            std::sort(ids.begin(), ids.end());
        }
        shard.records.push_back(annotated("r" + std::to_string(i), "en", ids));
    }
    auto curated = curate_shard(shard, probs, CurationSeed{31337});
    CHECK(curated.size() == shard.records.size());
}

TEST_CASE("curated records carry valid provenance") {
    ProbabilityTable probs;
    probs.per_lang["en"] = {0.4, 0.7};
    Shard shard{0, {}};
    for (int i = 0; i < 300; ++i) {
        shard.records.push_back(annotated("r" + std::to_string(i), "en", {0, 1}));
    }
    for (const CuratedRecord& c : curate_shard(shard, probs, CurationSeed{8})) {
        const auto& ids = *c.record.matched_entry_ids;
        CHECK(std::find(ids.begin(), ids.end(), c.selected_by_entry) != ids.end());
        CHECK(c.sample_draw < probs.per_lang["en"][c.selected_by_entry]);
    }
}

TEST_CASE("probability table from mapped counts equals the in-memory route") {
    TempDir dir;
    EntryCountTable counts;
    counts.metadata_hash = "h";
    counts.per_lang["en"] = kFixture;
    counts.per_lang["xx"] = {2, 4, 6, 8, 20};
    persist_counts(counts, dir.path());
    ThresholdTable thresholds = compute_thresholds(counts, 4);

    ProbabilityTable from_memory = compute_probability_table(counts, thresholds);
    ProbabilityTable from_mmap =
        compute_probability_table(MappedCounts::open(dir.path()), thresholds);
    CHECK(from_memory.per_lang == from_mmap.per_lang);

    ThresholdTable stale = thresholds;
    stale.metadata_hash = "different";
    CHECK_THROWS_AS(compute_probability_table(MappedCounts::open(dir.path()), stale),
                    ValidationError);
}

TEST_CASE("thresholds save/load round trip") {
    TempDir dir;
    ThresholdTable table;
    table.t_en = 170000;
    table.p = 0.06;
    table.metadata_hash = "abcd";
    table.per_lang_t = {{"en", 170000}, {"de", 9000}, {"other", 17}};
    save_thresholds(table, dir / "thresholds.json");
    ThresholdTable back = load_thresholds(dir / "thresholds.json");
    CHECK(back.t_en == table.t_en);
    CHECK(back.p == table.p);
    CHECK(back.per_lang_t == table.per_lang_t);
    CHECK(back.metadata_hash == table.metadata_hash);
}
