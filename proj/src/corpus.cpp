#include "worldcurate/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <unordered_set>

#include "worldcurate/errors.hpp"

namespace worldcurate {

namespace {

using nlohmann::json;

std::string require_string(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw ValidationError(std::string("missing field \"") + key + "\"");
    if (!it->is_string()) throw ValidationError(std::string("field \"") + key + "\" is not a string");
    return it->get<std::string>();
}

std::optional<std::uint32_t> shard_id_from_stem(const std::string& stem) {
    std::size_t end = stem.size();
    while (end > 0 && std::isdigit(static_cast<unsigned char>(stem[end - 1]))) --end;
    if (end == stem.size()) return std::nullopt;
    // Cap digit run to avoid overflow on pathological names.
    std::string digits = stem.substr(end);
    if (digits.size() > 9) digits = digits.substr(digits.size() - 9);
    return static_cast<std::uint32_t>(std::stoul(digits));
}

void append_record_line(std::ofstream& out, const json& j) {
    out << j.dump() << '\n';
}

json parse_line(const std::string& line, const std::filesystem::path& path, std::size_t lineno) {
    try {
        return json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what(), lineno);
    }
}

}  // namespace

AltTextRecord record_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("record is not a JSON object");
    AltTextRecord r;
    r.record_id = require_string(j, "record_id");
    if (r.record_id.empty()) throw ValidationError("record_id is empty");
    r.image_ref = require_string(j, "image_ref");
    r.text = require_string(j, "text");
    if (auto it = j.find("lang"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) throw ValidationError("field \"lang\" is not a string");
        r.lang = it->get<std::string>();
    }
    if (auto it = j.find("matched_entry_ids"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) throw ValidationError("field \"matched_entry_ids\" is not an array");
        std::vector<std::uint32_t> ids;
        ids.reserve(it->size());
        for (const auto& v : *it) {
            if (!v.is_number_unsigned()) {
                throw ValidationError("matched_entry_ids must hold non-negative integers");
            }
            ids.push_back(v.get<std::uint32_t>());
        }
        if (!std::is_sorted(ids.begin(), ids.end()) ||
            std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
            throw ValidationError("matched_entry_ids must be sorted and deduplicated");
        }
        r.matched_entry_ids = std::move(ids);
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        if (k == "record_id" || k == "image_ref" || k == "text" || k == "lang" ||
            k == "matched_entry_ids") {
            continue;
        }
        r.extra[k] = it.value();
    }
    return r;
}

json record_to_json(const AltTextRecord& r) {
    json j = r.extra.is_object() ? r.extra : json::object();
    j["record_id"] = r.record_id;
    j["image_ref"] = r.image_ref;
    j["text"] = r.text;
    if (r.lang) j["lang"] = *r.lang;
    if (r.matched_entry_ids) j["matched_entry_ids"] = *r.matched_entry_ids;
    return j;
}

Shard read_shard(const std::filesystem::path& path, ShardFormat format) {
    (void)format;  // jsonl is the only format
    std::ifstream in(path);
    if (!in) throw IoError("cannot open shard file: " + path.string());

    Shard shard;
    if (auto id = shard_id_from_stem(path.stem().string())) shard.shard_id = *id;

    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        json j = parse_line(line, path, lineno);
        AltTextRecord r;
        try {
            r = record_from_json(j);
        } catch (const ValidationError& e) {
            throw ParseError(path.string() + ": " + e.what(), lineno);
        }
        if (!seen_ids.insert(r.record_id).second) {
            throw ValidationError("duplicate record_id \"" + r.record_id + "\" in shard " +
                                  path.string());
        }
        shard.records.push_back(std::move(r));
    }
    if (in.bad()) throw IoError("read failure on shard file: " + path.string());
    return shard;
}

void write_shard(const Shard& shard, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open shard file for writing: " + path.string());
    for (const AltTextRecord& r : shard.records) {
        append_record_line(out, record_to_json(r));
    }
    out.flush();
    if (!out) throw IoError("write failure on shard file: " + path.string());
}

std::vector<CuratedRecord> read_curated(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open curated file: " + path.string());
    std::vector<CuratedRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        json j = parse_line(line, path, lineno);
        CuratedRecord c;
        try {
            c.record = record_from_json(j);
            auto se = j.find("selected_by_entry");
            auto sd = j.find("sample_draw");
            if (se == j.end() || !se->is_number_unsigned()) {
                throw ValidationError("missing or invalid \"selected_by_entry\"");
            }
            if (sd == j.end() || !sd->is_number()) {
                throw ValidationError("missing or invalid \"sample_draw\"");
            }
            c.selected_by_entry = se->get<std::uint32_t>();
            c.sample_draw = sd->get<double>();
        } catch (const ValidationError& e) {
            throw ParseError(path.string() + ": " + e.what(), lineno);
        }
        c.record.extra.erase("selected_by_entry");
        c.record.extra.erase("sample_draw");
        if (!c.record.matched_entry_ids ||
            !std::binary_search(c.record.matched_entry_ids->begin(),
                                c.record.matched_entry_ids->end(), c.selected_by_entry)) {
            throw ParseError(path.string() + ": selected_by_entry not in matched_entry_ids",
                             lineno);
        }
        out.push_back(std::move(c));
    }
    if (in.bad()) throw IoError("read failure on curated file: " + path.string());
    return out;
}

void write_curated(const std::vector<CuratedRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open curated file for writing: " + path.string());
    for (const CuratedRecord& c : records) {
        json j = record_to_json(c.record);
        j["selected_by_entry"] = c.selected_by_entry;
        j["sample_draw"] = c.sample_draw;
        append_record_line(out, j);
    }
    out.flush();
    if (!out) throw IoError("write failure on curated file: " + path.string());
}

std::string shard_filename(std::uint32_t shard_id) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "shard-%05u.jsonl", shard_id);
    return buf;
}

std::string curated_filename(std::uint32_t shard_id) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "curated-%05u.jsonl", shard_id);
    return buf;
}

std::vector<std::pair<std::uint32_t, std::filesystem::path>> list_shard_files(
    const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw IoError("not a directory: " + dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());

    std::vector<std::pair<std::uint32_t, std::filesystem::path>> out;
    out.reserve(files.size());
    std::unordered_set<std::uint32_t> used;
    std::uint32_t next_seq = 0;
    for (const auto& f : files) {
        std::uint32_t id;
        if (auto parsed = shard_id_from_stem(f.stem().string())) {
            id = *parsed;
        } else {
            id = next_seq++;
        }
        if (!used.insert(id).second) {
            throw ValidationError("shard id " + std::to_string(id) +
                                  " appears twice under " + dir.string());
        }
        out.emplace_back(id, f);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace worldcurate
