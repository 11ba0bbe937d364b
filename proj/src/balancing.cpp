#include "worldcurate/balancing.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "worldcurate/errors.hpp"

namespace worldcurate {

namespace {

using nlohmann::json;

constexpr const char* kThresholdsFormat = "worldcurate-thresholds-v1";

std::uint64_t total_of(std::span<const std::uint64_t> counts) {
    std::uint64_t total = 0;
    for (std::uint64_t c : counts) total += c;
    return total;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace

double t_to_p(std::uint64_t t, std::span<const std::uint64_t> counts) {
    if (counts.empty()) throw ValidationError("t_to_p: empty count vector");
    const std::uint64_t total = total_of(counts);
    if (total == 0) throw ValidationError("t_to_p: zero total count");
    std::uint64_t tail = 0;
    for (std::uint64_t c : counts) {
        if (c < t) tail += c;
    }
    return static_cast<double>(tail) / static_cast<double>(total);
}

std::uint64_t p_to_t(double p, std::span<const std::uint64_t> counts) {
    if (counts.empty()) throw ValidationError("p_to_t: empty count vector");
    std::vector<std::uint64_t> sorted(counts.begin(), counts.end());
    std::sort(sorted.begin(), sorted.end());
    const std::uint64_t total = total_of(sorted);
    if (total == 0) throw ValidationError("p_to_t: zero total count");

    std::uint64_t cumulative = 0;
    double best_distance = std::numeric_limits<double>::infinity();
    std::uint64_t best_value = sorted.front();
    for (std::uint64_t value : sorted) {
        cumulative += value;
        const double prob = static_cast<double>(cumulative) / static_cast<double>(total);
        const double distance = std::abs(prob - p);
        if (distance < best_distance) {  // strict: first index wins ties
            best_distance = distance;
            best_value = value;
        }
    }
    return best_value;
}

ThresholdTable compute_thresholds(const EntryCountTable& counts, std::uint64_t t_en,
                                  ThresholdOptions options) {
    if (t_en == 0) throw ValidationError("t_en must be positive");
    auto en = counts.per_lang.find("en");
    if (en == counts.per_lang.end()) {
        throw ValidationError("count table has no \"en\" language; t_en cannot anchor p");
    }

    ThresholdTable table;
    table.t_en = t_en;
    table.metadata_hash = counts.metadata_hash;
    table.pinned_english = options.pin_english;
    table.force_global_t = options.force_global_t;
    table.p = t_to_p(t_en, en->second);

    for (const auto& [lang, vec] : counts.per_lang) {
        if (vec.empty() || total_of(vec) == 0) continue;  // nothing matched; no threshold needed
        std::uint64_t t;
        if (options.force_global_t) {
            t = t_en;
        } else if (options.pin_english && lang == "en") {
            t = t_en;
        } else {
            t = std::max<std::uint64_t>(1, p_to_t(table.p, vec));
        }
        table.per_lang_t.emplace(lang, t);
    }
    return table;
}

std::vector<double> compute_entry_probs(std::span<const std::uint64_t> counts, std::uint64_t t) {
    if (t == 0) throw ValidationError("threshold must be positive");
    std::vector<double> probs(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const std::uint64_t clamped = std::max(counts[i], t);
        probs[i] = static_cast<double>(t) / static_cast<double>(clamped);
    }
    return probs;
}

ProbabilityTable compute_probability_table(const EntryCountTable& counts,
                                           const ThresholdTable& thresholds) {
    ProbabilityTable table;
    for (const auto& [lang, t] : thresholds.per_lang_t) {
        auto it = counts.per_lang.find(lang);
        if (it == counts.per_lang.end()) {
            throw ValidationError("threshold for \"" + lang + "\" has no count vector");
        }
        table.per_lang.emplace(lang, compute_entry_probs(it->second, t));
    }
    return table;
}

ProbabilityTable compute_probability_table(const MappedCounts& counts,
                                           const ThresholdTable& thresholds) {
    if (!thresholds.metadata_hash.empty() && !counts.metadata_hash().empty() &&
        thresholds.metadata_hash != counts.metadata_hash()) {
        throw ValidationError("thresholds and counts were built against different metadata");
    }
    ProbabilityTable table;
    for (const auto& [lang, t] : thresholds.per_lang_t) {
        table.per_lang.emplace(lang, compute_entry_probs(counts.values(lang), t));
    }
    return table;
}

double sample_draw(std::uint64_t seed, std::string_view record_id, std::uint32_t entry_id) {
    std::uint64_t x = splitmix64(seed ^ fnv1a64(record_id));
    x = splitmix64(x ^ (0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(entry_id) + 1)));
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

std::vector<CuratedRecord> curate_shard(const Shard& annotated, const ProbabilityTable& probs,
                                        CurationSeed seed) {
    std::vector<CuratedRecord> curated;
    for (const AltTextRecord& r : annotated.records) {
        if (!r.matched_entry_ids || r.matched_entry_ids->empty()) continue;
        if (!r.lang) {
            throw ValidationError("record \"" + r.record_id + "\" has matches but no language");
        }
        auto lang_probs = probs.per_lang.find(*r.lang);
        if (lang_probs == probs.per_lang.end()) {
            throw ValidationError("no probabilities for language \"" + *r.lang +
                                  "\" (record \"" + r.record_id + "\")");
        }
        for (std::uint32_t entry_id : *r.matched_entry_ids) {
            if (entry_id >= lang_probs->second.size()) {
                throw ValidationError("matched entry " + std::to_string(entry_id) +
                                      " out of range for \"" + *r.lang + "\"");
            }
            const double u = sample_draw(seed.value, r.record_id, entry_id);
            if (u < lang_probs->second[entry_id]) {
                curated.push_back(CuratedRecord{r, entry_id, u});
                break;
            }
        }
    }
    return curated;
}

void save_thresholds(const ThresholdTable& table, const std::filesystem::path& path) {
    json per_lang = json::object();
    for (const auto& [lang, t] : table.per_lang_t) per_lang[lang] = t;
    json doc = {
        {"format", kThresholdsFormat},
        {"metadata_hash", table.metadata_hash},
        {"t_en", table.t_en},
        {"p", table.p},
        {"per_lang_t", per_lang},
        {"pinned_english", table.pinned_english},
        {"force_global_t", table.force_global_t},
    };
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write thresholds file: " + path.string());
    out << doc.dump(2) << '\n';
    out.flush();
    if (!out) throw IoError("write failure on thresholds file: " + path.string());
}

ThresholdTable load_thresholds(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open thresholds file: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    if (doc.value("format", "") != kThresholdsFormat) {
        throw ValidationError(path.string() + ": unknown format");
    }
    ThresholdTable table;
    table.t_en = doc.at("t_en").get<std::uint64_t>();
    table.p = doc.at("p").get<double>();
    table.metadata_hash = doc.value("metadata_hash", "");
    table.pinned_english = doc.value("pinned_english", false);
    table.force_global_t = doc.value("force_global_t", false);
    for (const auto& [lang, t] : doc.at("per_lang_t").items()) {
        table.per_lang_t.emplace(lang, t.get<std::uint64_t>());
    }
    return table;
}

}  // namespace worldcurate
