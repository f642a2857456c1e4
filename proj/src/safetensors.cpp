#include "quantforge/safetensors.hpp"

#include "quantforge/errors.hpp"
#include "quantforge/fp16.hpp"
#include "quantforge/kquant.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace quantforge {

static constexpr uint64_t kMaxHeaderLen = uint64_t{256} * 1024 * 1024;

uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

uint64_t tensor_seed(std::string_view name, uint64_t seed) {
    uint64_t h = fnv1a64(name);
    h ^= seed + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
    return h;
}

std::vector<float> gaussian_values(uint64_t stream_seed, size_t count, float stddev) {
    std::mt19937_64 rng(stream_seed);
    std::vector<float> out(count);
    // explicit Box-Muller so the stream does not depend on the standard
    // library's normal_distribution implementation
    size_t i = 0;
    while (i < count) {
        const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
        const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;          // [0, 1)
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.141592653589793 * u2;
        out[i++] = static_cast<float>(stddev * r * std::cos(a));
        if (i < count) out[i++] = static_cast<float>(stddev * r * std::sin(a));
    }
    return out;
}

static uint64_t file_size_of(std::ifstream& in, const std::string& path) {
    in.seekg(0, std::ios::end);
    const std::streamoff n = in.tellg();
    if (n < 0) throw Error("container: cannot determine size of \"" + path + "\"");
    in.seekg(0, std::ios::beg);
    return static_cast<uint64_t>(n);
}

static void throw_if_shard_index(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return;
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto j = nlohmann::json::parse(text, nullptr, false);
    if (!j.is_discarded() && j.is_object() && j.contains("weight_map"))
        throw FormatError("container: \"" + path +
                          "\" is a sharded-checkpoint index, not a single-file container; "
                          "sharded models are not supported");
}

StContainer StContainer::open(const std::string& path) {
    StContainer c;
    c.path_ = path;

    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("container: cannot open \"" + path + "\"");
    const uint64_t file_size = file_size_of(in, path);

    if (file_size < 8) {
        throw_if_shard_index(path);
        throw FormatError("container: \"" + path + "\" is too small to hold a header");
    }

    uint8_t len_bytes[8];
    in.read(reinterpret_cast<char*>(len_bytes), 8);
    if (!in) throw CorruptionError("container: failed reading the header length");
    uint64_t header_len = 0;
    for (int i = 0; i < 8; ++i) header_len |= static_cast<uint64_t>(len_bytes[i]) << (8 * i);

    if (header_len > kMaxHeaderLen || 8 + header_len > file_size) {
        throw_if_shard_index(path);
        throw CorruptionError("container: header length " + std::to_string(header_len) +
                              " points past the end of the file (" + std::to_string(file_size) +
                              " bytes)");
    }

    std::string header_text(header_len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw CorruptionError("container: failed reading the header");

    nlohmann::ordered_json header = nlohmann::ordered_json::parse(header_text, nullptr, false);
    if (header.is_discarded()) {
        throw_if_shard_index(path);
        throw FormatError("container: header is not valid JSON");
    }
    if (!header.is_object()) throw FormatError("container: header is not a JSON object");

    c.data_begin_ = 8 + header_len;
    c.data_size_ = file_size - c.data_begin_;

    for (const auto& [key, value] : header.items()) {
        if (key == "__metadata__") {
            if (!value.is_object())
                throw FormatError("container: __metadata__ is not an object");
            for (const auto& [mk, mv] : value.items()) {
                if (!mv.is_string())
                    throw FormatError("container: __metadata__ value for \"" + mk +
                                      "\" is not a string");
                // model_name is the manifest's first-class name, not a pair
                // (the writer re-emits it, keeping round-trips symmetric).
                if (mk == "model_name")
                    c.manifest_.model_name = mv.get<std::string>();
                else
                    c.manifest_.metadata.emplace_back(mk, mv.get<std::string>());
            }
            continue;
        }
        StEntry e;
        e.name = key;
        try {
            if (!value.is_object()) throw FormatError("entry is not an object");
            const std::string dtype = value.at("dtype").get<std::string>();
            if (dtype != "F32" && dtype != "F16" && dtype != "BF16")
                throw UnsupportedTypeError("container: tensor \"" + key + "\" has dtype \"" +
                                           dtype + "\" (supported: F32, F16, BF16)");
            e.dtype = scalar_type_from_string(dtype);
            e.shape = value.at("shape").get<std::vector<int64_t>>();
            if (e.shape.empty()) e.shape.push_back(1);  // rank-0 scalar
            const auto offsets = value.at("data_offsets").get<std::vector<uint64_t>>();
            if (offsets.size() != 2) throw FormatError("data_offsets is not a pair");
            e.begin = offsets[0];
            e.end = offsets[1];
        } catch (const nlohmann::json::exception& ex) {
            throw FormatError("container: tensor \"" + key + "\": " + ex.what());
        }

        int64_t elems = 1;
        for (int64_t d : e.shape) {
            if (d < 1)
                throw FormatError("container: tensor \"" + key + "\" has a non-positive dimension");
            elems *= d;
        }
        const uint64_t want = static_cast<uint64_t>(elems) * scalar_bytes(e.dtype);
        if (e.end < e.begin || e.end > c.data_size_)
            throw CorruptionError("container: tensor \"" + key + "\" offsets [" +
                                  std::to_string(e.begin) + ", " + std::to_string(e.end) +
                                  ") outside the data region of " + std::to_string(c.data_size_) +
                                  " bytes");
        if (e.end - e.begin != want)
            throw CorruptionError("container: tensor \"" + key + "\" holds " +
                                  std::to_string(e.end - e.begin) + " bytes, expected " +
                                  std::to_string(want) + " for its shape and dtype");

        if (!c.index_.emplace(e.name, c.entries_.size()).second)
            throw FormatError("container: duplicate tensor \"" + key + "\"");
        c.manifest_.entries.push_back({e.name, e.shape, e.dtype});
        c.entries_.push_back(std::move(e));
    }

    // non-overlap across entries
    std::vector<size_t> order(c.entries_.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return c.entries_[a].begin < c.entries_[b].begin;
    });
    for (size_t i = 1; i < order.size(); ++i) {
        const StEntry& prev = c.entries_[order[i - 1]];
        const StEntry& cur = c.entries_[order[i]];
        if (cur.begin < prev.end)
            throw CorruptionError("container: tensors \"" + prev.name + "\" and \"" + cur.name +
                                  "\" overlap");
    }

    try {
        c.manifest_.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("container: ") + e.what());
    }
    return c;
}

const StEntry& StContainer::entry(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end())
        throw std::invalid_argument("container: no tensor named \"" + name + "\"");
    return entries_[it->second];
}

std::vector<uint8_t> StContainer::tensor_bytes(const std::string& name) const {
    const StEntry& e = entry(name);
    std::ifstream in(path_, std::ios::binary);
    if (!in) throw Error("container: cannot open \"" + path_ + "\"");
    in.seekg(static_cast<std::streamoff>(data_begin_ + e.begin));
    std::vector<uint8_t> bytes(e.end - e.begin);
    if (!bytes.empty()) {
        in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!in) throw CorruptionError("container: short read for tensor \"" + name + "\"");
    }
    return bytes;
}

std::vector<float> StContainer::tensor_f32(const std::string& name) const {
    const StEntry& e = entry(name);
    return scalar_to_f32(tensor_bytes(name), to_quant_type(e.dtype));
}

void synth_fixture(const ModelManifest& manifest, uint64_t seed, std::ostream& sink) {
    manifest.validate();

    nlohmann::ordered_json header = nlohmann::ordered_json::object();
    nlohmann::ordered_json meta = nlohmann::ordered_json::object();
    if (!manifest.model_name.empty()) meta["model_name"] = manifest.model_name;
    for (const auto& [k, v] : manifest.metadata)
        if (!meta.contains(k)) meta[k] = v;
    if (!meta.empty()) header["__metadata__"] = meta;

    uint64_t offset = 0;
    for (const auto& e : manifest.entries) {
        nlohmann::ordered_json je;
        je["dtype"] = to_string(e.dtype);
        je["shape"] = e.shape;
        const uint64_t bytes = static_cast<uint64_t>(e.byte_count());
        je["data_offsets"] = {offset, offset + bytes};
        header[e.name] = std::move(je);
        offset += bytes;
    }

    const std::string text = header.dump();
    const uint64_t header_len = text.size();
    char len_bytes[8];
    for (int i = 0; i < 8; ++i) len_bytes[i] = static_cast<char>((header_len >> (8 * i)) & 0xFF);
    sink.write(len_bytes, 8);
    sink.write(text.data(), static_cast<std::streamsize>(text.size()));

    for (const auto& e : manifest.entries) {
        const std::vector<float> values =
            gaussian_values(tensor_seed(e.name, seed), static_cast<size_t>(e.elem_count()), 0.02f);
        const std::vector<uint8_t> bytes = convert_scalar(values, to_quant_type(e.dtype));
        sink.write(reinterpret_cast<const char*>(bytes.data()),
                   static_cast<std::streamsize>(bytes.size()));
    }
    if (!sink) throw Error("container: write failed");
}

void synth_fixture_file(const ModelManifest& manifest, uint64_t seed, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("container: cannot open \"" + path + "\" for writing");
    synth_fixture(manifest, seed, out);
    out.close();
    if (!out) throw Error("container: write to \"" + path + "\" failed");
}

} // namespace quantforge
