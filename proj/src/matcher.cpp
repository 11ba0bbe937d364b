#include "worldcurate/matcher.hpp"

#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <deque>
#include <fstream>

#include "worldcurate/errors.hpp"
#include "worldcurate/unicode.hpp"

namespace worldcurate {

namespace {

constexpr char kAutomatonMagic[8] = {'W', 'C', 'A', 'C', '0', '0', '0', '1'};

bool boundary_ok(std::u32string_view text, std::size_t start, std::size_t end) {
    if (start > 0 && uni::is_word_char(text[start - 1])) return false;
    if (end < text.size() && uni::is_word_char(text[end])) return false;
    return true;
}

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::filesystem::path& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("truncated automaton file: " + path.string());
    return v;
}

void write_string(std::ofstream& out, std::string_view s) {
    write_pod(out, static_cast<std::uint64_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in, const std::filesystem::path& path) {
    auto n = read_pod<std::uint64_t>(in, path);
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw IoError("truncated automaton file: " + path.string());
    return s;
}

}  // namespace

std::int32_t PatternAutomaton::find_next(std::int32_t node, char32_t c) const {
    const auto& next = nodes_[static_cast<std::size_t>(node)].next;
    auto it = std::lower_bound(next.begin(), next.end(), c,
                               [](const auto& edge, char32_t key) { return edge.first < key; });
    if (it != next.end() && it->first == c) return it->second;
    return -1;
}

std::int32_t PatternAutomaton::insert_path(std::u32string_view pattern) {
    std::int32_t cur = 0;
    for (char32_t c : pattern) {
        std::int32_t next = find_next(cur, c);
        if (next < 0) {
            next = static_cast<std::int32_t>(nodes_.size());
            nodes_.emplace_back();
            auto& edges = nodes_[static_cast<std::size_t>(cur)].next;
            auto it = std::lower_bound(
                edges.begin(), edges.end(), c,
                [](const auto& edge, char32_t key) { return edge.first < key; });
            edges.insert(it, {c, next});
        }
        cur = next;
    }
    return cur;
}

void PatternAutomaton::build_links() {
    std::deque<std::int32_t> queue;
    for (const auto& [c, child] : nodes_[0].next) {
        nodes_[static_cast<std::size_t>(child)].fail = 0;
        queue.push_back(child);
    }
    while (!queue.empty()) {
        std::int32_t u = queue.front();
        queue.pop_front();
        Node& un = nodes_[static_cast<std::size_t>(u)];
        un.output_link = nodes_[static_cast<std::size_t>(un.fail)].pattern >= 0
                             ? un.fail
                             : nodes_[static_cast<std::size_t>(un.fail)].output_link;
        for (const auto& [c, v] : un.next) {
            std::int32_t f = un.fail;
            std::int32_t target = -1;
            while (true) {
                target = find_next(f, c);
                if (target >= 0 && target != v) break;
                if (f == 0) {
                    target = -1;
                    break;
                }
                f = nodes_[static_cast<std::size_t>(f)].fail;
            }
            nodes_[static_cast<std::size_t>(v)].fail = target >= 0 ? target : 0;
            queue.push_back(v);
        }
    }
}

PatternAutomaton PatternAutomaton::compile(const MetadataEntrySet& entries, MatchOptions options) {
    PatternAutomaton a;
    a.lang_ = entries.lang;
    a.options_ = options;
    a.pattern_count_ = entries.entries.size();
    a.pattern_lengths_.resize(entries.entries.size());
    a.nodes_.emplace_back();  // root

    for (std::size_t i = 0; i < entries.entries.size(); ++i) {
        std::u32string pattern = uni::normalize_to_u32(entries.entries[i]);
        if (pattern.empty()) {
            throw ValidationError("entry " + std::to_string(i) + " of \"" + entries.lang +
                                  "\" normalizes to an empty pattern");
        }
        std::int32_t node = a.insert_path(pattern);
        Node& n = a.nodes_[static_cast<std::size_t>(node)];
        if (n.pattern >= 0) {
            throw ValidationError("duplicate normalized entries in \"" + entries.lang +
                                  "\": indices " + std::to_string(n.pattern) + " and " +
                                  std::to_string(i));
        }
        n.pattern = static_cast<std::int32_t>(i);
        a.pattern_lengths_[i] = static_cast<std::uint32_t>(pattern.size());
    }
    a.build_links();
    return a;
}

std::vector<std::uint32_t> PatternAutomaton::match(std::string_view text) const {
    return match_normalized(uni::normalize_to_u32(text));
}

std::vector<std::uint32_t> PatternAutomaton::match_normalized(std::u32string_view text) const {
    std::vector<std::uint32_t> hits;
    if (pattern_count_ == 0 || text.empty()) return hits;

    std::int32_t cur = 0;
    for (std::size_t pos = 0; pos < text.size(); ++pos) {
        const char32_t c = text[pos];
        while (true) {
            std::int32_t next = find_next(cur, c);
            if (next >= 0) {
                cur = next;
                break;
            }
            if (cur == 0) break;
            cur = nodes_[static_cast<std::size_t>(cur)].fail;
        }
        std::int32_t out = nodes_[static_cast<std::size_t>(cur)].pattern >= 0
                               ? cur
                               : nodes_[static_cast<std::size_t>(cur)].output_link;
        while (out >= 0) {
            const Node& n = nodes_[static_cast<std::size_t>(out)];
            const auto id = static_cast<std::uint32_t>(n.pattern);
            if (!options_.word_boundary ||
                boundary_ok(text, pos + 1 - pattern_lengths_[id], pos + 1)) {
                hits.push_back(id);
            }
            out = n.output_link;
        }
    }
    std::sort(hits.begin(), hits.end());
    hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
    return hits;
}

std::vector<std::uint32_t> brute_force_match(std::string_view text, const MetadataEntrySet& entries,
                                             MatchOptions options) {
    std::vector<std::u32string> patterns;
    patterns.reserve(entries.entries.size());
    for (const std::string& e : entries.entries) patterns.push_back(uni::normalize_to_u32(e));
    return brute_force_match_normalized(uni::normalize_to_u32(text), patterns, options);
}

std::vector<std::uint32_t> brute_force_match_normalized(std::u32string_view text,
                                                        const std::vector<std::u32string>& patterns,
                                                        MatchOptions options) {
    std::vector<std::uint32_t> hits;
    for (std::size_t i = 0; i < patterns.size(); ++i) {
        const std::u32string& p = patterns[i];
        if (p.empty() || p.size() > text.size()) continue;
        if (!options.word_boundary) {
            if (text.find(p) != std::u32string_view::npos) {
                hits.push_back(static_cast<std::uint32_t>(i));
            }
            continue;
        }
        for (std::size_t pos = text.find(p); pos != std::u32string_view::npos;
             pos = text.find(p, pos + 1)) {
            if (boundary_ok(text, pos, pos + p.size())) {
                hits.push_back(static_cast<std::uint32_t>(i));
                break;
            }
        }
    }
    return hits;  // ascending by construction
}

void PatternAutomaton::save(const std::filesystem::path& path,
                            std::string_view metadata_hash) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write automaton file: " + path.string());
    out.write(kAutomatonMagic, sizeof(kAutomatonMagic));
    write_string(out, lang_);
    write_string(out, metadata_hash);
    write_pod(out, static_cast<std::uint8_t>(options_.word_boundary ? 1 : 0));
    write_pod(out, static_cast<std::uint64_t>(pattern_count_));
    for (std::uint32_t len : pattern_lengths_) write_pod(out, len);
    write_pod(out, static_cast<std::uint64_t>(nodes_.size()));
    for (const Node& n : nodes_) {
        write_pod(out, n.fail);
        write_pod(out, n.output_link);
        write_pod(out, n.pattern);
        write_pod(out, static_cast<std::uint32_t>(n.next.size()));
        for (const auto& [c, t] : n.next) {
            write_pod(out, static_cast<std::uint32_t>(c));
            write_pod(out, t);
        }
    }
    out.flush();
    if (!out) throw IoError("write failure on automaton file: " + path.string());
}

PatternAutomaton PatternAutomaton::load(const std::filesystem::path& path,
                                        std::string_view expected_metadata_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open automaton file: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kAutomatonMagic, sizeof(magic)) != 0) {
        throw ValidationError("not an automaton cache file: " + path.string());
    }
    PatternAutomaton a;
    a.lang_ = read_string(in, path);
    std::string hash = read_string(in, path);
    if (hash != expected_metadata_hash) {
        throw ValidationError("automaton cache " + path.string() +
                              " was built against different metadata");
    }
    a.options_.word_boundary = read_pod<std::uint8_t>(in, path) != 0;
    a.pattern_count_ = read_pod<std::uint64_t>(in, path);
    a.pattern_lengths_.resize(a.pattern_count_);
    for (std::uint32_t& len : a.pattern_lengths_) len = read_pod<std::uint32_t>(in, path);
    const auto node_count = read_pod<std::uint64_t>(in, path);
    a.nodes_.resize(node_count);
    for (Node& n : a.nodes_) {
        n.fail = read_pod<std::int32_t>(in, path);
        n.output_link = read_pod<std::int32_t>(in, path);
        n.pattern = read_pod<std::int32_t>(in, path);
        const auto edge_count = read_pod<std::uint32_t>(in, path);
        n.next.resize(edge_count);
        for (auto& [c, t] : n.next) {
            c = static_cast<char32_t>(read_pod<std::uint32_t>(in, path));
            t = read_pod<std::int32_t>(in, path);
        }
    }
    return a;
}

AutomatonCache::AutomatonCache(Loader loader, MatchOptions options)
    : loader_(std::move(loader)), options_(options) {
    if (!loader_) throw InternalError("AutomatonCache requires a loader");
}

void AutomatonCache::enable_disk_cache(std::filesystem::path dir, std::string metadata_hash) {
    std::filesystem::create_directories(dir);
    disk_dir_ = std::move(dir);
    metadata_hash_ = std::move(metadata_hash);
}

std::shared_ptr<const PatternAutomaton> AutomatonCache::get_or_compile(const std::string& lang) {
    std::shared_ptr<Slot> slot;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto& entry = slots_[lang];
        if (!entry) entry = std::make_shared<Slot>();
        slot = entry;
    }
    std::call_once(slot->once, [&] {
        std::filesystem::path cache_path;
        if (disk_dir_) {
            cache_path = *disk_dir_ / (lang + "." + metadata_hash_ + ".acauto");
            if (std::filesystem::exists(cache_path)) {
                try {
                    slot->automaton = std::make_shared<PatternAutomaton>(
                        PatternAutomaton::load(cache_path, metadata_hash_));
                    return;
                } catch (const std::exception&) {
                    // Corrupt cache entry: fall through and rebuild it.
                }
            }
        }
        auto automaton =
            std::make_shared<PatternAutomaton>(PatternAutomaton::compile(loader_(lang), options_));
        compile_count_.fetch_add(1);
        if (disk_dir_) {
            // Write-then-rename; pid suffix keeps concurrent processes apart.
            const auto tmp = cache_path.string() + ".tmp." + std::to_string(::getpid());
            automaton->save(tmp, metadata_hash_);
            std::filesystem::rename(tmp, cache_path);
        }
        slot->automaton = automaton;
    });
    return slot->automaton;
}

}  // namespace worldcurate
