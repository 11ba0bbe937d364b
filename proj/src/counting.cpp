#include "worldcurate/counting.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cstring>
#include <fstream>

#include "json.hpp"
#include "worldcurate/errors.hpp"

namespace worldcurate {

namespace {

using nlohmann::json;

constexpr const char* kCountsManifest = "counts.manifest.json";
constexpr const char* kCountsFormat = "worldcurate-counts-v1";

std::string counts_filename(const std::string& lang) { return lang + ".counts.u64le"; }

}  // namespace

EntryCountTable zero_counts(const std::map<std::string, MetadataEntrySet>& merged,
                            std::string_view metadata_hash) {
    EntryCountTable table;
    table.metadata_hash = metadata_hash;
    for (const auto& [lang, set] : merged) {
        table.per_lang.emplace(lang, std::vector<std::uint64_t>(set.entries.size(), 0));
    }
    return table;
}

CountShardResult count_shard(const Shard& shard, AutomatonCache& cache,
                             std::string_view metadata_hash) {
    CountShardResult result;
    result.annotated = shard;
    result.partial.metadata_hash = metadata_hash;
    for (AltTextRecord& r : result.annotated.records) {
        if (!r.lang) {
            throw ValidationError("record \"" + r.record_id +
                                  "\" has no language; run the lid stage first");
        }
        auto automaton = cache.get_or_compile(*r.lang);
        std::vector<std::uint32_t> matched = automaton->match(r.text);

        auto [it, inserted] = result.partial.per_lang.try_emplace(*r.lang);
        if (inserted) it->second.assign(automaton->pattern_count(), 0);
        for (std::uint32_t id : matched) it->second[id] += 1;

        r.matched_entry_ids = std::move(matched);
        result.partial.total_records += 1;
    }
    return result;
}

EntryCountTable merge_counts(const EntryCountTable& a, const EntryCountTable& b) {
    if (!a.metadata_hash.empty() && !b.metadata_hash.empty() &&
        a.metadata_hash != b.metadata_hash) {
        throw ValidationError("cannot merge count tables built against different metadata (" +
                              a.metadata_hash + " vs " + b.metadata_hash + ")");
    }
    EntryCountTable out = a;
    if (out.metadata_hash.empty()) out.metadata_hash = b.metadata_hash;
    out.total_records += b.total_records;
    for (const auto& [lang, counts] : b.per_lang) {
        auto [it, inserted] = out.per_lang.try_emplace(lang, counts);
        if (inserted) continue;
        if (it->second.size() != counts.size()) {
            throw ValidationError("count vector length mismatch for \"" + lang +
                                  "\": metadata drift between partial tables");
        }
        for (std::size_t i = 0; i < counts.size(); ++i) it->second[i] += counts[i];
    }
    return out;
}

void ensure_languages(EntryCountTable& table,
                      const std::map<std::string, MetadataEntrySet>& merged) {
    for (const auto& [lang, set] : merged) {
        auto [it, inserted] =
            table.per_lang.try_emplace(lang, std::vector<std::uint64_t>(set.entries.size(), 0));
        if (!inserted && it->second.size() != set.entries.size()) {
            throw ValidationError("count vector for \"" + lang +
                                  "\" does not match metadata entry count");
        }
    }
}

void persist_counts(const EntryCountTable& table, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json languages = json::object();
    for (const auto& [lang, counts] : table.per_lang) {
        const auto path = dir / counts_filename(lang);
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write counts file: " + path.string());
        for (std::uint64_t v : counts) {
            unsigned char bytes[8];
            for (int k = 0; k < 8; ++k) bytes[k] = static_cast<unsigned char>(v >> (8 * k));
            out.write(reinterpret_cast<const char*>(bytes), 8);
        }
        out.flush();
        if (!out) throw IoError("write failure on counts file: " + path.string());
        languages[lang] = {{"entries", counts.size()}, {"file", counts_filename(lang)}};
    }
    json manifest = {
        {"format", kCountsFormat},
        {"metadata_hash", table.metadata_hash},
        {"total_records", table.total_records},
        {"languages", languages},
    };
    const auto manifest_path = dir / kCountsManifest;
    std::ofstream out(manifest_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + manifest_path.string());
    out << manifest.dump(2) << '\n';
    out.flush();
    if (!out) throw IoError("write failure on " + manifest_path.string());
}

namespace {

json read_counts_manifest(const std::filesystem::path& dir) {
    const auto manifest_path = dir / kCountsManifest;
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) throw IoError("cannot open " + manifest_path.string());
    json manifest;
    try {
        in >> manifest;
    } catch (const json::parse_error& e) {
        throw ValidationError(manifest_path.string() + ": " + e.what());
    }
    if (manifest.value("format", "") != kCountsFormat) {
        throw ValidationError(manifest_path.string() + ": unknown format");
    }
    return manifest;
}

}  // namespace

EntryCountTable load_counts(const std::filesystem::path& dir) {
    json manifest = read_counts_manifest(dir);
    EntryCountTable table;
    table.metadata_hash = manifest.value("metadata_hash", "");
    table.total_records = manifest.value("total_records", std::uint64_t{0});
    for (const auto& [lang, info] : manifest.at("languages").items()) {
        const auto entries = info.at("entries").get<std::size_t>();
        const auto path = dir / info.at("file").get<std::string>();
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open counts file: " + path.string());
        std::vector<std::uint64_t> counts(entries);
        std::vector<unsigned char> bytes(entries * 8);
        in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
            throw ValidationError("truncated counts file: " + path.string());
        }
        char extra;
        if (in.read(&extra, 1)) {
            throw ValidationError("counts file longer than manifest says: " + path.string());
        }
        for (std::size_t i = 0; i < entries; ++i) {
            std::uint64_t v = 0;
            for (int k = 7; k >= 0; --k) v = (v << 8) | bytes[i * 8 + static_cast<std::size_t>(k)];
            counts[i] = v;
        }
        table.per_lang.emplace(lang, std::move(counts));
    }
    return table;
}

MappedCounts MappedCounts::open(const std::filesystem::path& dir) {
    json manifest = read_counts_manifest(dir);
    MappedCounts mc;
    mc.metadata_hash_ = manifest.value("metadata_hash", "");
    mc.total_records_ = manifest.value("total_records", std::uint64_t{0});
    for (const auto& [lang, info] : manifest.at("languages").items()) {
        const auto entries = info.at("entries").get<std::size_t>();
        const auto path = dir / info.at("file").get<std::string>();

        Mapping m;
        m.entries = entries;
        m.bytes = entries * 8;
        if (entries > 0) {
            int fd = ::open(path.c_str(), O_RDONLY);
            if (fd < 0) throw IoError("cannot open counts file: " + path.string());
            struct stat st {};
            if (::fstat(fd, &st) != 0) {
                ::close(fd);
                throw IoError("cannot stat counts file: " + path.string());
            }
            if (static_cast<std::size_t>(st.st_size) != m.bytes) {
                ::close(fd);
                throw ValidationError("counts file size mismatch: " + path.string() + " has " +
                                      std::to_string(st.st_size) + " bytes, expected " +
                                      std::to_string(m.bytes));
            }
            void* addr = ::mmap(nullptr, m.bytes, PROT_READ, MAP_PRIVATE, fd, 0);
            ::close(fd);
            if (addr == MAP_FAILED) throw IoError("mmap failed on " + path.string());
            m.addr = addr;
        }
        mc.mappings_.emplace(lang, m);
    }
    return mc;
}

MappedCounts::MappedCounts(MappedCounts&& other) noexcept
    : mappings_(std::move(other.mappings_)),
      metadata_hash_(std::move(other.metadata_hash_)),
      total_records_(other.total_records_) {
    other.mappings_.clear();
}

MappedCounts& MappedCounts::operator=(MappedCounts&& other) noexcept {
    if (this != &other) {
        for (auto& [lang, m] : mappings_) {
            if (m.addr != nullptr) ::munmap(m.addr, m.bytes);
        }
        mappings_ = std::move(other.mappings_);
        metadata_hash_ = std::move(other.metadata_hash_);
        total_records_ = other.total_records_;
        other.mappings_.clear();
    }
    return *this;
}

MappedCounts::~MappedCounts() {
    for (auto& [lang, m] : mappings_) {
        if (m.addr != nullptr) ::munmap(m.addr, m.bytes);
    }
}

const MappedCounts::Mapping& MappedCounts::mapping(const std::string& lang) const {
    auto it = mappings_.find(lang);
    if (it == mappings_.end()) {
        throw ValidationError("no counts for language \"" + lang + "\"");
    }
    return it->second;
}

std::uint64_t MappedCounts::at(const std::string& lang, std::size_t index) const {
    const Mapping& m = mapping(lang);
    if (index >= m.entries) {
        throw ValidationError("count index " + std::to_string(index) + " out of range for \"" +
                              lang + "\"");
    }
    const auto* p = static_cast<const unsigned char*>(m.addr) + index * 8;
    std::uint64_t v = 0;
    for (int k = 7; k >= 0; --k) v = (v << 8) | p[k];
    return v;
}

std::span<const std::uint64_t> MappedCounts::values(const std::string& lang) const {
    const Mapping& m = mapping(lang);
    // Little-endian host assumption; at() is the portable accessor.
    return {static_cast<const std::uint64_t*>(m.addr), m.entries};
}

std::size_t MappedCounts::size(const std::string& lang) const { return mapping(lang).entries; }

std::vector<std::string> MappedCounts::languages() const {
    std::vector<std::string> out;
    out.reserve(mappings_.size());
    for (const auto& [lang, m] : mappings_) out.push_back(lang);
    return out;
}

}  // namespace worldcurate
