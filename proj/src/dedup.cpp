#include "worldcurate/dedup.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "worldcurate/errors.hpp"

namespace worldcurate {

namespace {

constexpr char kEmbeddingMagic[8] = {'W', 'C', 'E', 'M', 'B', '0', '0', '1'};

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t x = state;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Box-Muller over an explicit stream; deterministic across platforms.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : state_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 =
            (static_cast<double>(splitmix64(state_) >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
        const double u2 = static_cast<double>(splitmix64(state_) >> 11) * 0x1.0p-53;  // [0, 1)
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

void write_u64le(std::ofstream& out, std::uint64_t v) {
    unsigned char bytes[8];
    for (int k = 0; k < 8; ++k) bytes[k] = static_cast<unsigned char>(v >> (8 * k));
    out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t read_u64le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int k = 7; k >= 0; --k) v = (v << 8) | p[k];
    return v;
}

void write_f32le(std::ofstream& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    unsigned char bytes[4];
    for (int k = 0; k < 4; ++k) bytes[k] = static_cast<unsigned char>(bits >> (8 * k));
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

float read_f32le(const unsigned char* p) {
    std::uint32_t bits = 0;
    for (int k = 3; k >= 0; --k) bits = (bits << 8) | p[k];
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

std::vector<std::string> read_id_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open id sidecar: " + path.string());
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ids.push_back(line);
    }
    return ids;
}

std::filesystem::path ids_path(const std::filesystem::path& path) {
    return std::filesystem::path(path.string() + ".ids");
}

}  // namespace

Projection build_projection(std::size_t dim, std::uint64_t seed) {
    if (dim == 0) throw ValidationError("projection dimension must be >= 1");
    Projection p;
    p.dim = dim;
    p.rows.resize(64 * dim);
    NormalStream stream(seed);
    for (float& v : p.rows) v = static_cast<float>(stream.next());
    return p;
}

std::uint64_t sign_hash(std::span<const float> v, const Projection& projection) {
    if (v.size() != projection.dim) {
        throw ValidationError("embedding dimension " + std::to_string(v.size()) +
                              " does not match projection dimension " +
                              std::to_string(projection.dim));
    }
    std::uint64_t bits = 0;
    for (std::size_t row = 0; row < 64; ++row) {
        const float* weights = projection.rows.data() + row * projection.dim;
        double dot = 0.0;
        for (std::size_t i = 0; i < projection.dim; ++i) {
            dot += static_cast<double>(weights[i]) * static_cast<double>(v[i]);
        }
        if (dot >= 0.0) bits |= (std::uint64_t{1} << row);
    }
    return bits;
}

int hamming_distance(std::uint64_t a, std::uint64_t b) { return std::popcount(a ^ b); }

EmbeddingFile read_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open embedding file: " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kEmbeddingMagic, 8) != 0) {
        throw ValidationError("not an embedding file: " + path.string());
    }
    unsigned char header[12];
    in.read(reinterpret_cast<char*>(header), 12);
    if (!in) throw ValidationError("truncated embedding header: " + path.string());
    std::uint32_t dim = 0;
    for (int k = 3; k >= 0; --k) dim = (dim << 8) | header[k];
    std::uint64_t count = read_u64le(header + 4);

    EmbeddingFile f;
    f.dim = dim;
    f.values.resize(count * dim);
    std::vector<unsigned char> bytes(f.values.size() * 4);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
        throw ValidationError("truncated embedding rows: " + path.string());
    }
    for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] = read_f32le(&bytes[i * 4]);
    for (float v : f.values) {
        if (!std::isfinite(v)) throw ValidationError("non-finite embedding value in " + path.string());
    }

    f.record_ids = read_id_lines(ids_path(path));
    if (f.record_ids.size() != count) {
        throw ValidationError("id sidecar has " + std::to_string(f.record_ids.size()) +
                              " lines but embedding file declares " + std::to_string(count));
    }
    return f;
}

void write_embeddings(const EmbeddingFile& file, const std::filesystem::path& path) {
    if (file.dim == 0 || file.values.size() != file.record_ids.size() * file.dim) {
        throw ValidationError("embedding file shape mismatch");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write embedding file: " + path.string());
    out.write(kEmbeddingMagic, 8);
    unsigned char header[12];
    for (int k = 0; k < 4; ++k) header[k] = static_cast<unsigned char>(file.dim >> (8 * k));
    const std::uint64_t count = file.record_ids.size();
    for (int k = 0; k < 8; ++k) header[4 + k] = static_cast<unsigned char>(count >> (8 * k));
    out.write(reinterpret_cast<const char*>(header), 12);
    for (float v : file.values) write_f32le(out, v);
    out.flush();
    if (!out) throw IoError("write failure on embedding file: " + path.string());

    std::ofstream ids(ids_path(path), std::ios::binary | std::ios::trunc);
    if (!ids) throw IoError("cannot write id sidecar for " + path.string());
    for (const std::string& id : file.record_ids) ids << id << '\n';
    ids.flush();
    if (!ids) throw IoError("write failure on id sidecar for " + path.string());
}

std::unordered_map<std::string, std::uint64_t> hash_embeddings(const EmbeddingFile& file,
                                                                const Projection& projection) {
    std::unordered_map<std::string, std::uint64_t> out;
    out.reserve(file.record_ids.size());
    for (std::size_t i = 0; i < file.record_ids.size(); ++i) {
        std::span<const float> row(file.values.data() + i * file.dim, file.dim);
        out[file.record_ids[i]] = sign_hash(row, projection);
    }
    return out;
}

void write_hashes(const std::vector<std::pair<std::string, std::uint64_t>>& hashes,
                  const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write hash file: " + path.string());
    for (const auto& [id, hash] : hashes) write_u64le(out, hash);
    out.flush();
    if (!out) throw IoError("write failure on hash file: " + path.string());

    std::ofstream ids(ids_path(path), std::ios::binary | std::ios::trunc);
    if (!ids) throw IoError("cannot write id sidecar for " + path.string());
    for (const auto& [id, hash] : hashes) ids << id << '\n';
    ids.flush();
    if (!ids) throw IoError("write failure on id sidecar for " + path.string());
}

namespace {

std::vector<std::uint64_t> read_hash_values(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open hash file: " + path.string());
    const auto size = static_cast<std::size_t>(in.tellg());
    if (size % 8 != 0) {
        throw ValidationError("hash file size is not a multiple of 8: " + path.string());
    }
    in.seekg(0);
    std::vector<unsigned char> bytes(size);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
    if (static_cast<std::size_t>(in.gcount()) != size) {
        throw IoError("read failure on hash file: " + path.string());
    }
    std::vector<std::uint64_t> values(size / 8);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = read_u64le(&bytes[i * 8]);
    return values;
}

}  // namespace

std::vector<std::pair<std::string, std::uint64_t>> read_hashes(const std::filesystem::path& path) {
    std::vector<std::uint64_t> values = read_hash_values(path);
    std::vector<std::string> ids = read_id_lines(ids_path(path));
    if (ids.size() != values.size()) {
        throw ValidationError("hash file and id sidecar disagree on count: " + path.string());
    }
    std::vector<std::pair<std::string, std::uint64_t>> out;
    out.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out.emplace_back(ids[i], values[i]);
    return out;
}

std::unordered_set<std::uint64_t> read_hash_set(const std::filesystem::path& path) {
    std::vector<std::uint64_t> values = read_hash_values(path);
    return {values.begin(), values.end()};
}

std::vector<CuratedRecord> dedup_against_benchmark(
    std::vector<CuratedRecord> curated,
    const std::unordered_map<std::string, std::uint64_t>& curated_hashes,
    const std::unordered_set<std::uint64_t>& benchmark_hashes, int radius, DedupStats* stats) {
    if (radius < 0) throw ValidationError("radius must be >= 0");
    DedupStats local;
    auto hits_benchmark = [&](std::uint64_t h) {
        if (benchmark_hashes.count(h)) return true;
        if (radius == 0) return false;
        for (std::uint64_t b : benchmark_hashes) {
            if (hamming_distance(h, b) <= radius) return true;
        }
        return false;
    };
    std::vector<CuratedRecord> kept;
    kept.reserve(curated.size());
    for (auto& c : curated) {
        auto it = curated_hashes.find(c.record.record_id);
        if (it == curated_hashes.end()) {
            ++local.unhashed;
            kept.push_back(std::move(c));
            continue;
        }
        if (hits_benchmark(it->second)) {
            ++local.removed;
        } else {
            kept.push_back(std::move(c));
        }
    }
    if (stats != nullptr) *stats = local;
    return kept;
}

std::unordered_set<std::string> read_id_list(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open id list: " + path.string());
    std::unordered_set<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) ids.insert(line);
    }
    return ids;
}

std::vector<CuratedRecord> apply_exclusion_list(std::vector<CuratedRecord> curated,
                                                const std::unordered_set<std::string>& excluded_ids,
                                                std::size_t* removed) {
    std::vector<CuratedRecord> kept;
    kept.reserve(curated.size());
    std::size_t dropped = 0;
    for (auto& c : curated) {
        if (excluded_ids.count(c.record.record_id)) {
            ++dropped;
        } else {
            kept.push_back(std::move(c));
        }
    }
    if (removed != nullptr) *removed = dropped;
    return kept;
}

}  // namespace worldcurate
