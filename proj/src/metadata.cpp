#include "worldcurate/metadata.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "worldcurate/errors.hpp"
#include "worldcurate/unicode.hpp"

namespace worldcurate {

namespace {

constexpr std::uint8_t kAllTags = kSourceLexicon | kSourceUnigram | kSourceBigram | kSourceTitle;

std::uint64_t fnv1a(std::uint64_t h, std::string_view bytes) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t fnv1a_byte(std::uint64_t h, std::uint8_t b) {
    h ^= b;
    h *= 1099511628211ull;
    return h;
}

// Top `cap` keys by descending count, ties by ascending key.
std::vector<std::string> top_by_count(const NgramCounter& counter,
                                      std::optional<std::size_t> cap) {
    std::vector<std::pair<std::string_view, std::uint64_t>> items;
    items.reserve(counter.counts.size());
    for (const auto& [k, v] : counter.counts) items.emplace_back(k, v);
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::size_t limit = cap.value_or(items.size());
    limit = std::min(limit, items.size());
    std::vector<std::string> out;
    out.reserve(limit);
    for (std::size_t i = 0; i < limit; ++i) out.emplace_back(items[i].first);
    return out;
}

}  // namespace

bool is_valid_language_code(std::string_view code) {
    if (code.size() < 2 || code.size() > 20) return false;
    for (char c : code) {
        if (!((c >= 'a' && c <= 'z') || c == '_')) return false;
    }
    return true;
}

void require_language_code(std::string_view code) {
    if (!is_valid_language_code(code)) {
        throw ValidationError("invalid language code: \"" + std::string(code) + "\"");
    }
}

std::string source_tags_to_string(std::uint8_t tags) {
    static const std::pair<SourceTag, const char*> names[] = {
        {kSourceLexicon, "lexicon"},
        {kSourceUnigram, "unigram"},
        {kSourceBigram, "bigram"},
        {kSourceTitle, "title"},
    };
    std::string out;
    for (const auto& [bit, name] : names) {
        if (tags & bit) {
            if (!out.empty()) out += '|';
            out += name;
        }
    }
    return out;
}

std::uint8_t source_tags_from_string(std::string_view s) {
    std::uint8_t tags = 0;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        std::size_t bar = s.find('|', pos);
        std::string_view part = s.substr(pos, bar == std::string_view::npos ? s.size() - pos
                                                                            : bar - pos);
        if (part == "lexicon") {
            tags |= kSourceLexicon;
        } else if (part == "unigram") {
            tags |= kSourceUnigram;
        } else if (part == "bigram") {
            tags |= kSourceBigram;
        } else if (part == "title") {
            tags |= kSourceTitle;
        } else if (!part.empty()) {
            throw ValidationError("unknown source tag: \"" + std::string(part) + "\"");
        }
        if (bar == std::string_view::npos) break;
        pos = bar + 1;
    }
    return tags;
}

void NgramCounter::merge(const NgramCounter& other) {
    if (other.lang != lang || other.n != n) {
        throw ValidationError("cannot merge n-gram counters for (" + lang + ", n=" +
                              std::to_string(n) + ") and (" + other.lang + ", n=" +
                              std::to_string(other.n) + ")");
    }
    for (const auto& [k, v] : other.counts) counts[k] += v;
}

void TokenizerRegistry::register_segmenter(const std::string& lang, Segmenter fn) {
    require_language_code(lang);
    segmenters_[lang] = std::move(fn);
}

const TokenizerRegistry::Segmenter* TokenizerRegistry::find(const std::string& lang) const {
    auto it = segmenters_.find(lang);
    return it == segmenters_.end() ? nullptr : &it->second;
}

const std::vector<std::string>& TokenizerRegistry::special_language_codes() {
    static const std::vector<std::string> codes = {
        "bo", "dz", "ja", "ryu", "km", "lo", "my", "th", "zh", "zh_classical", "zh_yue",
    };
    return codes;
}

std::vector<std::string> tokenize(std::string_view text, const std::string& lang,
                                  const TokenizerRegistry& registry) {
    if (const auto* segmenter = registry.find(lang)) {
        std::vector<std::string> tokens;
        try {
            tokens = (*segmenter)(text);
        } catch (const std::exception& e) {
            throw ValidationError("segmenter for language \"" + lang + "\" failed: " + e.what());
        }
        std::erase_if(tokens, [](const std::string& t) { return t.empty(); });
        return tokens;
    }
    std::u32string cps = uni::decode_utf8(text);
    std::vector<std::string> tokens;
    std::u32string current;
    for (char32_t c : cps) {
        if (uni::is_space(c) || uni::is_punct(c)) {
            if (!current.empty()) {
                tokens.push_back(uni::encode_utf8(current));
                current.clear();
            }
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) tokens.push_back(uni::encode_utf8(current));
    return tokens;
}

NgramCounter count_ngrams(const std::vector<std::string>& documents, const std::string& lang,
                          int n, const TokenizerRegistry& registry) {
    if (n != 1 && n != 2) throw ValidationError("n must be 1 or 2, got " + std::to_string(n));
    NgramCounter counter;
    counter.lang = lang;
    counter.n = n;
    for (const std::string& doc : documents) {
        std::vector<std::string> tokens = tokenize(doc, lang, registry);
        if (n == 1) {
            for (const std::string& t : tokens) ++counter.counts[t];
        } else {
            for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
                ++counter.counts[tokens[i] + ' ' + tokens[i + 1]];
            }
        }
    }
    return counter;
}

NgramCounter count_ngrams(std::istream& documents, const std::string& lang, int n,
                          const TokenizerRegistry& registry) {
    if (n != 1 && n != 2) throw ValidationError("n must be 1 or 2, got " + std::to_string(n));
    NgramCounter counter;
    counter.lang = lang;
    counter.n = n;
    std::string line;
    while (std::getline(documents, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        NgramCounter partial = count_ngrams(std::vector<std::string>{line}, lang, n, registry);
        counter.merge(partial);
    }
    return counter;
}

std::vector<std::string> rank_titles(std::vector<std::pair<std::string, std::uint64_t>> title_traffic) {
    std::unordered_map<std::string, std::uint64_t> merged;
    for (auto& [title, clicks] : title_traffic) merged[std::move(title)] += clicks;
    std::vector<std::pair<std::string, std::uint64_t>> items(merged.begin(), merged.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> out;
    out.reserve(items.size());
    for (auto& [title, clicks] : items) out.push_back(std::move(title));
    return out;
}

std::vector<std::string> ingest_lexicon(std::istream& in, const std::string& lang) {
    require_language_code(lang);
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t byte_offset = 0;
    while (std::getline(in, line)) {
        const std::size_t line_start = byte_offset;
        byte_offset += line.size() + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (auto bad = uni::find_invalid_utf8(line)) {
            throw ValidationError("invalid UTF-8 in lexicon for \"" + lang + "\" at byte offset " +
                                  std::to_string(line_start + *bad));
        }
        std::string entry = uni::trim(uni::normalize(line));
        if (entry.empty()) continue;
        if (seen.insert(entry).second) out.push_back(std::move(entry));
    }
    return out;
}

std::vector<std::string> ingest_lexicon_file(const std::filesystem::path& path,
                                             const std::string& lang) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open lexicon file: " + path.string());
    return ingest_lexicon(in, lang);
}

MetadataEntrySet build_metadata(const std::string& lang, const std::vector<std::string>& lexicon,
                                const NgramCounter& unigrams, const NgramCounter& bigrams,
                                const std::vector<std::string>& ranked_titles,
                                const SourceCaps& caps) {
    require_language_code(lang);
    if (unigrams.lang != lang || bigrams.lang != lang) {
        throw ValidationError("n-gram counter language does not match \"" + lang + "\"");
    }
    if (unigrams.n != 1) throw ValidationError("unigram counter has n != 1");
    if (bigrams.n != 2) throw ValidationError("bigram counter has n != 2");

    MetadataEntrySet set;
    set.lang = lang;
    std::unordered_map<std::string, std::size_t> index_of;

    auto add = [&](std::string_view raw, SourceTag tag) {
        std::string entry = uni::trim(uni::normalize(raw));
        if (entry.empty()) return;
        auto [it, inserted] = index_of.try_emplace(entry, set.entries.size());
        if (inserted) {
            set.entries.push_back(std::move(entry));
            set.source_tags.push_back(tag);
        } else {
            set.source_tags[it->second] |= tag;
        }
    };

    for (const std::string& e : lexicon) add(e, kSourceLexicon);
    for (const std::string& e : top_by_count(unigrams, caps.unigram)) add(e, kSourceUnigram);
    for (const std::string& e : top_by_count(bigrams, caps.bigram)) add(e, kSourceBigram);
    std::size_t title_limit = caps.title.value_or(ranked_titles.size());
    title_limit = std::min(title_limit, ranked_titles.size());
    for (std::size_t i = 0; i < title_limit; ++i) add(ranked_titles[i], kSourceTitle);

    return set;
}

void save_entry_set(const MetadataEntrySet& set, const std::filesystem::path& dir) {
    require_language_code(set.lang);
    if (set.entries.size() != set.source_tags.size()) {
        throw InternalError("entry/tag vectors out of sync for " + set.lang);
    }
    std::filesystem::create_directories(dir);

    const auto entries_path = dir / (set.lang + ".entries.txt");
    std::ofstream entries(entries_path, std::ios::binary | std::ios::trunc);
    if (!entries) throw IoError("cannot write " + entries_path.string());
    for (const std::string& e : set.entries) {
        if (e.empty() || e.find('\n') != std::string::npos) {
            throw ValidationError("entry not serializable as a line: \"" + e + "\"");
        }
        entries << e << '\n';
    }
    entries.flush();
    if (!entries) throw IoError("write failure on " + entries_path.string());

    const auto meta_path = dir / (set.lang + ".entries.meta.csv");
    std::ofstream meta(meta_path, std::ios::binary | std::ios::trunc);
    if (!meta) throw IoError("cannot write " + meta_path.string());
    meta << "# lang=" << set.lang << " count=" << set.entries.size() << '\n';
    meta << "entry_index,source_tags\n";
    for (std::size_t i = 0; i < set.entries.size(); ++i) {
        meta << i << ',' << source_tags_to_string(set.source_tags[i]) << '\n';
    }
    meta.flush();
    if (!meta) throw IoError("write failure on " + meta_path.string());
}

MetadataEntrySet load_entry_set(const std::filesystem::path& dir, const std::string& lang) {
    require_language_code(lang);
    const auto entries_path = dir / (lang + ".entries.txt");
    std::ifstream entries(entries_path, std::ios::binary);
    if (!entries) throw IoError("cannot open " + entries_path.string());

    MetadataEntrySet set;
    set.lang = lang;
    std::string line;
    std::size_t lineno = 0;
    std::unordered_set<std::string_view> seen;
    while (std::getline(entries, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) throw ParseError(entries_path.string() + ": empty entry", lineno);
        set.entries.push_back(line);
    }
    for (const std::string& e : set.entries) {
        if (!seen.insert(e).second) {
            throw ValidationError("duplicate entry \"" + e + "\" in " + entries_path.string());
        }
    }
    set.source_tags.assign(set.entries.size(), 0);

    // Sidecar is optional on load; hand-authored fixtures may omit it.
    const auto meta_path = dir / (lang + ".entries.meta.csv");
    std::ifstream meta(meta_path, std::ios::binary);
    if (meta) {
        lineno = 0;
        while (std::getline(meta, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#' || line.rfind("entry_index,", 0) == 0) continue;
            std::size_t comma = line.find(',');
            if (comma == std::string::npos) {
                throw ParseError(meta_path.string() + ": expected entry_index,source_tags", lineno);
            }
            std::size_t idx;
            try {
                idx = std::stoul(line.substr(0, comma));
            } catch (const std::exception&) {
                throw ParseError(meta_path.string() + ": bad entry index", lineno);
            }
            if (idx >= set.entries.size()) {
                throw ParseError(meta_path.string() + ": entry index out of range", lineno);
            }
            set.source_tags[idx] = source_tags_from_string(
                std::string_view(line).substr(comma + 1)) & kAllTags;
        }
    }
    return set;
}

MetadataCatalog load_catalog(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw IoError("metadata directory not found: " + dir.string());
    }
    MetadataCatalog catalog;
    const std::string suffix = ".entries.txt";
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::string name = e.path().filename().string();
        if (name.size() <= suffix.size() || name.substr(name.size() - suffix.size()) != suffix) {
            continue;
        }
        std::string lang = name.substr(0, name.size() - suffix.size());
        require_language_code(lang);
        catalog.by_lang.emplace(lang, load_entry_set(dir, lang));
    }
    return catalog;
}

std::string metadata_content_hash(const std::map<std::string, MetadataEntrySet>& by_lang) {
    std::uint64_t h = 14695981039346656037ull;
    for (const auto& [lang, set] : by_lang) {
        h = fnv1a(h, lang);
        h = fnv1a_byte(h, 0x1F);
        for (const std::string& e : set.entries) {
            h = fnv1a(h, e);
            h = fnv1a_byte(h, 0x1E);
        }
        h = fnv1a_byte(h, 0x1D);
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace worldcurate
