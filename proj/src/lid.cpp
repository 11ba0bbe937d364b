#include "worldcurate/lid.hpp"

#include <algorithm>
#include <fstream>

#include "worldcurate/errors.hpp"
#include "worldcurate/unicode.hpp"

namespace worldcurate {

namespace {

void require_not_other(std::string_view code, const char* what) {
    if (code == kOtherLang) {
        throw ValidationError(std::string("\"other\" is reserved and cannot be a ") + what);
    }
}

}  // namespace

NgramProfileClassifier NgramProfileClassifier::from_profiles(
    std::map<std::string, Profile> profiles) {
    NgramProfileClassifier c;
    std::set<std::size_t> lengths;
    for (auto& [lang, profile] : profiles) {
        require_language_code(lang);
        require_not_other(lang, "profile language");
        LangProfile lp;
        lp.lang = lang;
        std::uint64_t total = 0;
        for (const auto& [ngram, count] : profile) total += count;
        if (total == 0) continue;
        for (const auto& [ngram, count] : profile) {
            if (count == 0) continue;
            lengths.insert(uni::decode_utf8(ngram).size());
            lp.relative_freq[ngram] = static_cast<double>(count) / static_cast<double>(total);
        }
        c.langs_.insert(lang);
        c.profiles_.push_back(std::move(lp));
    }
    c.ngram_lengths_.assign(lengths.begin(), lengths.end());
    return c;
}

NgramProfileClassifier NgramProfileClassifier::load(const std::filesystem::path& profile_dir) {
    if (!std::filesystem::is_directory(profile_dir)) {
        throw IoError("profile directory not found: " + profile_dir.string());
    }
    std::map<std::string, Profile> profiles;
    for (const auto& e : std::filesystem::directory_iterator(profile_dir)) {
        if (!e.is_regular_file() || e.path().extension() != ".profile") continue;
        std::string lang = e.path().stem().string();
        require_language_code(lang);
        std::ifstream in(e.path(), std::ios::binary);
        if (!in) throw IoError("cannot open profile: " + e.path().string());
        Profile p;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            std::size_t tab = line.find('\t');
            if (tab == std::string::npos || tab == 0) {
                throw ParseError(e.path().string() + ": expected ngram<TAB>count", lineno);
            }
            std::uint64_t count;
            try {
                count = std::stoull(line.substr(tab + 1));
            } catch (const std::exception&) {
                throw ParseError(e.path().string() + ": bad count", lineno);
            }
            p[line.substr(0, tab)] += count;
        }
        profiles.emplace(std::move(lang), std::move(p));
    }
    if (profiles.empty()) {
        throw ValidationError("no .profile files under " + profile_dir.string());
    }
    return from_profiles(std::move(profiles));
}

LidResult NgramProfileClassifier::classify(std::string_view text) const {
    if (text.empty() || profiles_.empty()) return {kOtherLang, 0.0};

    std::u32string cps;
    try {
        cps = uni::decode_utf8(text);
    } catch (const ValidationError&) {
        return {kOtherLang, 0.0};
    }
    if (cps.empty()) return {kOtherLang, 0.0};

    // Term frequencies of text n-grams at every length found in the profiles.
    std::unordered_map<std::string, std::uint32_t> tf;
    for (std::size_t len : ngram_lengths_) {
        if (len == 0 || len > cps.size()) continue;
        for (std::size_t i = 0; i + len <= cps.size(); ++i) {
            ++tf[uni::encode_utf8(std::u32string_view(cps).substr(i, len))];
        }
    }

    double best = 0.0;
    double sum = 0.0;
    const std::string* best_lang = nullptr;
    for (const LangProfile& lp : profiles_) {
        double score = 0.0;
        for (const auto& [ngram, count] : tf) {
            auto it = lp.relative_freq.find(ngram);
            if (it != lp.relative_freq.end()) score += count * it->second;
        }
        sum += score;
        if (score > best) {
            best = score;
            best_lang = &lp.lang;
        }
    }
    if (best_lang == nullptr || sum <= 0.0) return {kOtherLang, 0.0};
    return {*best_lang, best / sum};
}

const std::set<std::string>& NgramProfileClassifier::supported_langs() const { return langs_; }

std::map<std::string, std::string> default_alias_table() {
    return {
        {"zh_classical", "zh"},
        {"zh_yue", "zh"},
        {"ryu", "ja"},
        {"dz", "bo"},
    };
}

std::map<std::string, std::string> load_alias_table(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path, std::ios::binary);
    if (!in) throw IoError("cannot open alias table: " + csv_path.string());
    std::map<std::string, std::string> table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#' || line.rfind("meta_code,", 0) == 0) continue;
        std::size_t comma = line.find(',');
        if (comma == std::string::npos) {
            throw ParseError(csv_path.string() + ": expected meta_code,lid_code", lineno);
        }
        std::string meta = line.substr(0, comma);
        std::string lid = line.substr(comma + 1);
        require_language_code(meta);
        table[meta] = lid;
    }
    return table;
}

LanguageMapping build_language_mapping(const std::set<std::string>& lid_langs,
                                       const std::set<std::string>& meta_langs,
                                       const std::map<std::string, std::string>& alias_table) {
    for (const std::string& l : lid_langs) require_not_other(l, "LID language");
    for (const std::string& l : meta_langs) require_not_other(l, "metadata language");

    LanguageMapping mapping;
    for (const std::string& lid : lid_langs) mapping.lid_to_meta[lid];  // empty groups allowed

    for (const std::string& meta : meta_langs) {
        auto alias = alias_table.find(meta);
        if (alias != alias_table.end()) {
            const std::string& target = alias->second;
            if (target.empty() || target == "-") {
                mapping.other_bucket.insert(meta);
            } else if (lid_langs.count(target)) {
                mapping.lid_to_meta[target].insert(meta);
            } else {
                throw ValidationError("alias target \"" + target + "\" for metadata language \"" +
                                      meta + "\" is not a LID language");
            }
        } else if (lid_langs.count(meta)) {
            mapping.lid_to_meta[meta].insert(meta);
        } else {
            mapping.other_bucket.insert(meta);
        }
    }
    return mapping;
}

namespace {

MetadataEntrySet merge_group(const MetadataCatalog& catalog, const std::set<std::string>& group,
                             const std::string& out_lang) {
    MetadataEntrySet merged;
    merged.lang = out_lang;
    std::unordered_map<std::string, std::size_t> index_of;
    for (const std::string& meta_lang : group) {  // std::set iterates lexicographically
        auto it = catalog.by_lang.find(meta_lang);
        if (it == catalog.by_lang.end()) {
            throw ValidationError("metadata language \"" + meta_lang + "\" missing from catalog");
        }
        const MetadataEntrySet& src = it->second;
        for (std::size_t i = 0; i < src.entries.size(); ++i) {
            auto [pos, inserted] = index_of.try_emplace(src.entries[i], merged.entries.size());
            if (inserted) {
                merged.entries.push_back(src.entries[i]);
                merged.source_tags.push_back(src.source_tags[i]);
            } else {
                merged.source_tags[pos->second] |= src.source_tags[i];
            }
        }
    }
    return merged;
}

}  // namespace

std::map<std::string, MetadataEntrySet> merge_metadata_by_mapping(const MetadataCatalog& catalog,
                                                                  const LanguageMapping& mapping) {
    std::map<std::string, MetadataEntrySet> merged;
    for (const auto& [lid, group] : mapping.lid_to_meta) {
        merged.emplace(lid, merge_group(catalog, group, lid));
    }
    merged.emplace(kOtherLang, merge_group(catalog, mapping.other_bucket, kOtherLang));
    return merged;
}

LidResult identify_language(std::string_view text, const LanguageClassifier& model) {
    LidResult r = model.classify(text);
    if (r.lang != kOtherLang && !model.supported_langs().count(r.lang)) {
        throw InternalError("classifier returned unsupported language \"" + r.lang + "\"");
    }
    if (r.confidence < 0.0 || r.confidence > 1.0) {
        throw InternalError("classifier confidence out of [0,1]");
    }
    return r;
}

void assign_languages(Shard& shard, const LanguageClassifier& model, double confidence_floor) {
    for (AltTextRecord& r : shard.records) {
        LidResult res = identify_language(r.text, model);
        r.lang = res.confidence < confidence_floor ? kOtherLang : res.lang;
    }
}

}  // namespace worldcurate
