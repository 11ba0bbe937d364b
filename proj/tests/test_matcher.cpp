#include "worldcurate/matcher.hpp"

#include <random>
#include <set>
#include <thread>

#include "doctest.h"
#include "test_util.hpp"
#include "worldcurate/errors.hpp"
#include "worldcurate/unicode.hpp"

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

// Random Unicode text over several scripts, including multi-byte code points.
std::string random_text(std::mt19937_64& rng, std::size_t max_len) {
    static const std::u32string alphabet =
        U"abcdefgh ij.kl,mn"
        U"äöüßéàç"
        U"猫犬写真好き"
        U"صورةجميلة"
        U"αβγδ"
        U"🐱🎉";
    const std::size_t len = rng() % (max_len + 1);
    std::u32string cps;
    cps.reserve(len);
    for (std::size_t i = 0; i < len; ++i) cps.push_back(alphabet[rng() % alphabet.size()]);
    return uni::encode_utf8(cps);
}

}  // namespace

TEST_CASE("substr_match: single pattern in the middle of text") {
    PatternAutomaton a = PatternAutomaton::compile(entry_set("en", {"a"}));
    CHECK(a.match("bab") == std::vector<std::uint32_t>{0});
    CHECK(a.pattern_count() == 1);
}

TEST_CASE("substr_match: classic multi-pattern case") {
    // Entries he=0, she=1, his=2, hers=3; "ushers" contains she, he, hers.
    PatternAutomaton a = PatternAutomaton::compile(entry_set("en", {"he", "she", "his", "hers"}));
    auto hits = a.match("ushers");
    CHECK(hits == std::vector<std::uint32_t>{0, 1, 3});
    CHECK(brute_force_match("ushers", entry_set("en", {"he", "she", "his", "hers"})) == hits);
}

TEST_CASE("substr_match: empty entry list matches nothing") {
    PatternAutomaton a = PatternAutomaton::compile(entry_set("en", {}));
    CHECK(a.match("anything at all").empty());
    CHECK(a.pattern_count() == 0);
}

TEST_CASE("substr_match: empty text matches nothing") {
    PatternAutomaton a = PatternAutomaton::compile(entry_set("en", {"x"}));
    CHECK(a.match("").empty());
}

TEST_CASE("substr_match: per-language matching keeps 'mit' in German text") {
    PatternAutomaton de = PatternAutomaton::compile(entry_set("de", {"mit", "uns"}));
    auto hits = de.match("Komm mit uns");
    CHECK(hits == std::vector<std::uint32_t>{0, 1});
}

TEST_CASE("substr_match: overlapping patterns both reported") {
    PatternAutomaton a = PatternAutomaton::compile(entry_set("en", {"cat", "cat food"}));
    CHECK(a.match("my cat food") == std::vector<std::uint32_t>{0, 1});
}

TEST_CASE("substr_match: repeated occurrences collapse to one id") {
    PatternAutomaton a = PatternAutomaton::compile(entry_set("en", {"ab"}));
    CHECK(a.match("ab ab ab") == std::vector<std::uint32_t>{0});
}

TEST_CASE("compile: duplicate normalized entries rejected") {
    CHECK_THROWS_AS(PatternAutomaton::compile(entry_set("en", {"cat", "CAT"})), ValidationError);
    CHECK_THROWS_AS(PatternAutomaton::compile(entry_set("en", {"x", "x"})), ValidationError);
}

TEST_CASE("matching is invariant to NFKC and case differences") {
    PatternAutomaton a = PatternAutomaton::compile(entry_set("en", {"Café", "ｃａｔ"}));
    // Decomposed e + combining acute, uppercase.
    CHECK(a.match("CAFÉ TIME") == std::vector<std::uint32_t>{0});
    // Fullwidth text, halfwidth pattern and vice versa.
    CHECK(a.match("my cat here") == std::vector<std::uint32_t>{1});
    CHECK(a.match("ＣＡＦÉ") == std::vector<std::uint32_t>{0});
}

TEST_CASE("multi-byte characters never produce partial matches") {
    // é is 0xC3 0xA9; ã is 0xC3 0xA3 — sharing the lead byte must not match.
    PatternAutomaton a = PatternAutomaton::compile(entry_set("xx", {"é"}));
    CHECK(a.match("ã").empty());
    CHECK(a.match("é") == std::vector<std::uint32_t>{0});
}

TEST_CASE("oracle equivalence on randomized unicode inputs") {
    std::mt19937_64 rng(424242);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n_entries = 1 + rng() % 30;
        std::set<std::string> uniq;
        std::string text = random_text(rng, 60);
        for (std::size_t i = 0; i < n_entries; ++i) {
            std::string candidate;
            if (!text.empty() && rng() % 2) {
                // Half the entries are substrings of the text, so hits exist.
                std::u32string cps = uni::decode_utf8(text);
                std::size_t start = rng() % cps.size();
                std::size_t len = 1 + rng() % std::min<std::size_t>(cps.size() - start, 6);
                candidate = uni::encode_utf8(std::u32string_view(cps).substr(start, len));
            } else {
                candidate = random_text(rng, 6);
            }
            std::string normalized = uni::normalize(candidate);
            if (normalized.empty()) continue;
            uniq.insert(normalized);
        }
        MetadataEntrySet set = entry_set("xx", {uniq.begin(), uniq.end()});
        PatternAutomaton a = PatternAutomaton::compile(set);
        CHECK(a.match(text) == brute_force_match(text, set));
    }
}

TEST_CASE("single-character entries equal character-set membership") {
    std::mt19937_64 rng(7);
    std::vector<std::string> chars = {"a", "b", "c", "猫", "犬", "é", "🐱"};
    MetadataEntrySet set = entry_set("xx", chars);
    PatternAutomaton a = PatternAutomaton::compile(set);
    for (int trial = 0; trial < 50; ++trial) {
        std::string text = random_text(rng, 40);
        std::u32string norm = uni::normalize_to_u32(text);
        std::vector<std::uint32_t> expected;
        for (std::size_t i = 0; i < chars.size(); ++i) {
            std::u32string c = uni::normalize_to_u32(chars[i]);
            if (norm.find(c[0]) != std::u32string::npos) {
                expected.push_back(static_cast<std::uint32_t>(i));
            }
        }
        CHECK(a.match(text) == expected);
    }
}

TEST_CASE("monotonicity: adding an entry never removes matches") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 40; ++trial) {
        std::string text = random_text(rng, 50);
        std::set<std::string> base_set;
        for (int i = 0; i < 8; ++i) {
            std::string n = uni::normalize(random_text(rng, 4));
            if (!n.empty()) base_set.insert(n);
        }
        if (base_set.empty()) continue;
        std::vector<std::string> base(base_set.begin(), base_set.end());
        std::string extra = uni::normalize("zzz" + std::to_string(trial));
        auto before = PatternAutomaton::compile(entry_set("xx", base)).match(text);
        std::vector<std::string> larger = base;
        larger.push_back(extra);
        auto after = PatternAutomaton::compile(entry_set("xx", larger)).match(text);
        for (std::uint32_t id : before) {
            CHECK(std::find(after.begin(), after.end(), id) != after.end());
        }
    }
}

TEST_CASE("word-boundary mode drops flanked occurrences") {
    MatchOptions boundary{.word_boundary = true};
    MetadataEntrySet set = entry_set("en", {"cat"});
    PatternAutomaton strict = PatternAutomaton::compile(set, boundary);
    CHECK(strict.match("a cat sat") == std::vector<std::uint32_t>{0});
    CHECK(strict.match("concatenate").empty());
    CHECK(strict.match("cat!").size() == 1);
    CHECK(brute_force_match("concatenate", set, boundary).empty());
    CHECK(brute_force_match("a cat sat", set, boundary) == std::vector<std::uint32_t>{0});
    // Default mode keeps the embedded occurrence.
    CHECK(PatternAutomaton::compile(set).match("concatenate") == std::vector<std::uint32_t>{0});
}

TEST_CASE("word-boundary: any unflanked occurrence suffices") {
    MatchOptions boundary{.word_boundary = true};
    PatternAutomaton a = PatternAutomaton::compile(entry_set("en", {"cat"}), boundary);
    CHECK(a.match("concatenate cat") == std::vector<std::uint32_t>{0});
}

TEST_CASE("cache: one compilation per language") {
    int loads = 0;
    AutomatonCache cache([&](const std::string& lang) {
        ++loads;
        return entry_set(lang, {"pattern"});
    });
    auto first = cache.get_or_compile("fr");
    auto second = cache.get_or_compile("fr");
    CHECK(first.get() == second.get());  // identical automaton
    CHECK(cache.compile_count() == 1);
    CHECK(loads == 1);

    cache.get_or_compile("de");
    CHECK(cache.compile_count() == 2);
}

TEST_CASE("cache: compilations bounded by distinct languages, not lookups") {
    AutomatonCache cache([](const std::string& lang) { return entry_set(lang, {"x"}); });
    std::vector<std::string> langs = {"aa", "bb", "cc"};
    for (int i = 0; i < 1000; ++i) cache.get_or_compile(langs[i % langs.size()]);
    CHECK(cache.compile_count() == 3);
}

TEST_CASE("cache: concurrent lookups compile once (single-flight)") {
    AutomatonCache cache([](const std::string& lang) {
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        return entry_set(lang, {"x", "y"});
    });
    std::vector<std::thread> threads;
    std::vector<std::shared_ptr<const PatternAutomaton>> results(8);
    for (int i = 0; i < 8; ++i) {
        threads.emplace_back([&cache, &results, i] { results[i] = cache.get_or_compile("zh"); });
    }
    for (auto& t : threads) t.join();
    CHECK(cache.compile_count() == 1);
    for (int i = 1; i < 8; ++i) CHECK(results[i].get() == results[0].get());
}

TEST_CASE("cache: loader failure propagates") {
    AutomatonCache cache([](const std::string& lang) -> MetadataEntrySet {
        throw ValidationError("no metadata for " + lang);
    });
    CHECK_THROWS_AS(cache.get_or_compile("xx"), ValidationError);
}

TEST_CASE("automaton disk cache: save/load round trip preserves matching") {
    TempDir dir;
    MetadataEntrySet set = entry_set("en", {"he", "she", "hers", "猫"});
    PatternAutomaton a = PatternAutomaton::compile(set);
    a.save(dir / "en.auto", "deadbeef00000000");
    PatternAutomaton b = PatternAutomaton::load(dir / "en.auto", "deadbeef00000000");
    for (const char* text : {"ushers", "猫が好き", "", "nothing here"}) {
        CHECK(a.match(text) == b.match(text));
    }
    CHECK(b.lang() == "en");
    CHECK(b.pattern_count() == 4);
}

TEST_CASE("automaton disk cache: metadata hash mismatch rejected") {
    TempDir dir;
    PatternAutomaton a = PatternAutomaton::compile(entry_set("en", {"x"}));
    a.save(dir / "en.auto", "aaaa");
    CHECK_THROWS_AS(PatternAutomaton::load(dir / "en.auto", "bbbb"), ValidationError);
}

TEST_CASE("cache with disk directory: second cache process-equivalent loads from disk") {
    TempDir dir;
    int loads = 0;
    auto loader = [&](const std::string& lang) {
        ++loads;
        return entry_set(lang, {"alpha", "beta"});
    };
    AutomatonCache first(loader);
    first.enable_disk_cache(dir.path(), "cafe0000cafe0000");
    first.get_or_compile("en");
    CHECK(loads == 1);
    CHECK(first.compile_count() == 1);

    AutomatonCache second(loader);
    second.enable_disk_cache(dir.path(), "cafe0000cafe0000");
    auto a = second.get_or_compile("en");
    CHECK(loads == 1);  // served from disk, loader untouched
    CHECK(second.compile_count() == 0);
    CHECK(a->match("alpha beta") == std::vector<std::uint32_t>{0, 1});
}
