#include "quantforge/gguf.hpp"

#include "quantforge/errors.hpp"
#include "quantforge/log.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace quantforge {

static constexpr char kMagic[4] = {'G', 'G', 'U', 'F'};
static constexpr uint64_t kMaxSaneCount = uint64_t{1} << 20;
static constexpr uint32_t kMaxSaneDims = 16;
static constexpr int kMaxArrayDepth = 8;

uint64_t align_up(uint64_t v, uint64_t alignment) {
    return (v + alignment - 1) / alignment * alignment;
}

// ---- value helpers ----

GgufMetadataValue GgufMetadataValue::array(GgufValueType elem, Array items) {
    GgufMetadataValue v;
    v.value = Storage(std::move(items));
    v.elem_type = elem;
    return v;
}

bool GgufMetadataValue::operator==(const GgufMetadataValue& other) const {
    if (value != other.value) return false;
    if (type() == GgufValueType::Array && elem_type != other.elem_type) return false;
    return true;
}

std::string GgufMetadataValue::to_display() const {
    switch (type()) {
        case GgufValueType::UInt8: return std::to_string(std::get<uint8_t>(value));
        case GgufValueType::Int8: return std::to_string(std::get<int8_t>(value));
        case GgufValueType::UInt16: return std::to_string(std::get<uint16_t>(value));
        case GgufValueType::Int16: return std::to_string(std::get<int16_t>(value));
        case GgufValueType::UInt32: return std::to_string(std::get<uint32_t>(value));
        case GgufValueType::Int32: return std::to_string(std::get<int32_t>(value));
        case GgufValueType::Float32: return std::to_string(std::get<float>(value));
        case GgufValueType::Bool: return std::get<bool>(value) ? "true" : "false";
        case GgufValueType::String: {
            const auto& s = std::get<std::string>(value);
            if (s.size() <= 60) return "\"" + s + "\"";
            return "\"" + s.substr(0, 57) + "...\"";
        }
        case GgufValueType::Array: {
            static const char* names[] = {"uint8", "int8", "uint16", "int16", "uint32",
                                          "int32", "float32", "bool", "string", "array",
                                          "uint64", "int64", "float64"};
            const auto& a = std::get<Array>(value);
            const uint32_t e = static_cast<uint32_t>(elem_type);
            return "[" + std::to_string(a.size()) + " x " + (e <= 12 ? names[e] : "?") + "]";
        }
        case GgufValueType::UInt64: return std::to_string(std::get<uint64_t>(value));
        case GgufValueType::Int64: return std::to_string(std::get<int64_t>(value));
        case GgufValueType::Float64: return std::to_string(std::get<double>(value));
    }
    return "?";
}

uint32_t ggml_type_id(QuantType t) {
    switch (t) {
        case QuantType::F32: return kGgmlF32;
        case QuantType::F16: return kGgmlF16;
        case QuantType::BF16: return kGgmlBF16;
        case QuantType::Q8_0: return kGgmlQ8_0;
        case QuantType::Q4_K: return kGgmlQ4_K;
        case QuantType::Q6_K: return kGgmlQ6_K;
        case QuantType::NF4:
            throw UnsupportedTypeError("NF4 has no GGUF storage type");
    }
    throw UnsupportedTypeError("unknown quant type");
}

std::optional<QuantType> quant_type_from_ggml(uint32_t id) {
    switch (id) {
        case kGgmlF32: return QuantType::F32;
        case kGgmlF16: return QuantType::F16;
        case kGgmlBF16: return QuantType::BF16;
        case kGgmlQ8_0: return QuantType::Q8_0;
        case kGgmlQ4_K: return QuantType::Q4_K;
        case kGgmlQ6_K: return QuantType::Q6_K;
        default: return std::nullopt;
    }
}

std::string ggml_type_display(uint32_t id) {
    if (auto t = quant_type_from_ggml(id)) return to_string(*t);
    return "unknown(" + std::to_string(id) + ")";
}

uint64_t GgufTensorInfo::elem_count() const {
    uint64_t n = 1;
    for (uint64_t d : dims) n *= d;
    return n;
}

std::vector<int64_t> GgufTensorInfo::shape() const {
    std::vector<int64_t> s(dims.rbegin(), dims.rend());
    return s;
}

bool GgufTensorInfo::operator==(const GgufTensorInfo& other) const {
    return name == other.name && dims == other.dims && type_id == other.type_id &&
           offset == other.offset;
}

uint32_t GgufFile::alignment() const {
    const GgufMetadataValue* v = find_metadata("general.alignment");
    if (!v) return 32;
    if (v->type() != GgufValueType::UInt32)
        throw CorruptionError("gguf: general.alignment must be uint32");
    const uint32_t a = std::get<uint32_t>(v->value);
    if (a == 0 || (a & (a - 1)) != 0)
        throw CorruptionError("gguf: general.alignment must be a power of two, got " +
                              std::to_string(a));
    return a;
}

const GgufMetadataValue* GgufFile::find_metadata(const std::string& key) const {
    for (const auto& [k, v] : metadata)
        if (k == key) return &v;
    return nullptr;
}

std::span<const uint8_t> GgufFile::tensor_bytes(const GgufTensorInfo& info) const {
    if (info.offset + info.nbytes > tensor_data.size())
        throw CorruptionError("gguf: tensor \"" + info.name + "\" range outside data region");
    return std::span<const uint8_t>(tensor_data.data() + info.offset, info.nbytes);
}

bool GgufFile::operator==(const GgufFile& other) const {
    return version == other.version && metadata == other.metadata && tensors == other.tensors &&
           tensor_data == other.tensor_data;
}

// ---- size accounting (shared by the writer and the size estimator) ----

static uint64_t value_payload_bytes(const GgufMetadataValue& v) {
    switch (v.type()) {
        case GgufValueType::UInt8:
        case GgufValueType::Int8:
        case GgufValueType::Bool: return 1;
        case GgufValueType::UInt16:
        case GgufValueType::Int16: return 2;
        case GgufValueType::UInt32:
        case GgufValueType::Int32:
        case GgufValueType::Float32: return 4;
        case GgufValueType::UInt64:
        case GgufValueType::Int64:
        case GgufValueType::Float64: return 8;
        case GgufValueType::String: return 8 + std::get<std::string>(v.value).size();
        case GgufValueType::Array: {
            uint64_t n = 4 + 8;  // element type + count
            for (const auto& e : std::get<GgufMetadataValue::Array>(v.value))
                n += value_payload_bytes(e);
            return n;
        }
    }
    return 0;
}

static uint64_t kv_bytes(const std::string& key, const GgufMetadataValue& v) {
    return 8 + key.size() + 4 + value_payload_bytes(v);
}

static uint64_t info_bytes(const std::string& name, size_t n_dims) {
    return 8 + name.size() + 4 + 8 * n_dims + 4 + 8;
}

static int64_t entry_stored_bytes(const std::vector<int64_t>& shape, QuantType t) {
    const BlockGeometry g = geometry(t);
    int64_t rows = 1;
    for (size_t i = 0; i + 1 < shape.size(); ++i) rows *= shape[i];
    const int64_t row_len = shape.back();
    if (row_len % g.block_elems != 0)
        throw std::invalid_argument("row length " + std::to_string(row_len) +
                                    " not divisible by block size of " + to_string(t));
    return rows * (row_len / g.block_elems) * g.block_bytes;
}

// ---- writer ----

namespace {

class Emitter {
public:
    void u8(uint8_t v) { buf_.push_back(v); }
    void u16(uint16_t v) { le(v); }
    void u32(uint32_t v) { le(v); }
    void u64(uint64_t v) { le(v); }
    void i8(int8_t v) { u8(static_cast<uint8_t>(v)); }
    void i16(int16_t v) { le(static_cast<uint16_t>(v)); }
    void i32(int32_t v) { le(static_cast<uint32_t>(v)); }
    void i64(int64_t v) { le(static_cast<uint64_t>(v)); }
    void f32(float v) {
        uint32_t b;
        std::memcpy(&b, &v, 4);
        le(b);
    }
    void f64(double v) {
        uint64_t b;
        std::memcpy(&b, &v, 8);
        le(b);
    }
    void str(const std::string& s) {
        u64(s.size());
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    void raw(const void* p, size_t n) {
        const uint8_t* b = static_cast<const uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    const std::vector<uint8_t>& bytes() const { return buf_; }
    size_t size() const { return buf_.size(); }

private:
    template <typename T>
    void le(T v) {
        for (size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    std::vector<uint8_t> buf_;
};

void emit_value(Emitter& e, const GgufMetadataValue& v, int depth) {
    if (depth > kMaxArrayDepth) throw std::invalid_argument("gguf: metadata array nesting too deep");
    switch (v.type()) {
        case GgufValueType::UInt8: e.u8(std::get<uint8_t>(v.value)); break;
        case GgufValueType::Int8: e.i8(std::get<int8_t>(v.value)); break;
        case GgufValueType::UInt16: e.u16(std::get<uint16_t>(v.value)); break;
        case GgufValueType::Int16: e.i16(std::get<int16_t>(v.value)); break;
        case GgufValueType::UInt32: e.u32(std::get<uint32_t>(v.value)); break;
        case GgufValueType::Int32: e.i32(std::get<int32_t>(v.value)); break;
        case GgufValueType::Float32: e.f32(std::get<float>(v.value)); break;
        case GgufValueType::Bool: e.u8(std::get<bool>(v.value) ? 1 : 0); break;
        case GgufValueType::String: e.str(std::get<std::string>(v.value)); break;
        case GgufValueType::Array: {
            const auto& items = std::get<GgufMetadataValue::Array>(v.value);
            for (const auto& item : items)
                if (item.type() != v.elem_type)
                    throw std::invalid_argument("gguf: heterogeneous metadata array");
            e.u32(static_cast<uint32_t>(v.elem_type));
            e.u64(items.size());
            for (const auto& item : items) emit_value(e, item, depth + 1);
            break;
        }
        case GgufValueType::UInt64: e.u64(std::get<uint64_t>(v.value)); break;
        case GgufValueType::Int64: e.i64(std::get<int64_t>(v.value)); break;
        case GgufValueType::Float64: e.f64(std::get<double>(v.value)); break;
    }
}

} // namespace

static void validate_for_write(const GgufFile& file, uint32_t alignment) {
    if (file.version != 3)
        throw std::invalid_argument("gguf: only version 3 is written, got " +
                                    std::to_string(file.version));
    std::unordered_set<std::string> keys;
    for (const auto& [k, v] : file.metadata) {
        (void)v;
        if (!keys.insert(k).second)
            throw std::invalid_argument("gguf: duplicate metadata key \"" + k + "\"");
    }
    std::unordered_set<std::string> names;
    uint64_t prev_end = 0;
    for (const auto& t : file.tensors) {
        if (t.dims.empty())
            throw std::invalid_argument("gguf: tensor \"" + t.name + "\" has no dimensions");
        for (uint64_t d : t.dims)
            if (d == 0)
                throw std::invalid_argument("gguf: tensor \"" + t.name + "\" has a zero dimension");
        if (!names.insert(t.name).second)
            throw std::invalid_argument("gguf: duplicate tensor name \"" + t.name + "\"");
        if (t.offset % alignment != 0)
            throw std::invalid_argument("gguf: tensor \"" + t.name + "\" offset " +
                                        std::to_string(t.offset) + " not aligned to " +
                                        std::to_string(alignment));
        if (t.offset < prev_end)
            throw std::invalid_argument("gguf: tensor \"" + t.name + "\" overlaps the previous tensor");
        if (auto qt = quant_type_from_ggml(t.type_id)) {
            const BlockGeometry g = geometry(*qt);
            if (t.dims[0] % static_cast<uint64_t>(g.block_elems) != 0)
                throw std::invalid_argument("gguf: tensor \"" + t.name + "\" row length " +
                                            std::to_string(t.dims[0]) +
                                            " not divisible by block size of " + to_string(*qt));
            uint64_t expect = t.dims[0] / g.block_elems * g.block_bytes;
            for (size_t i = 1; i < t.dims.size(); ++i) expect *= t.dims[i];
            if (t.nbytes != expect)
                throw std::invalid_argument("gguf: tensor \"" + t.name + "\" has " +
                                            std::to_string(t.nbytes) + " bytes, expected " +
                                            std::to_string(expect) + " for its type and shape");
        }
        if (t.offset + t.nbytes > file.tensor_data.size())
            throw std::invalid_argument("gguf: tensor \"" + t.name + "\" extends past the data region");
        prev_end = t.offset + t.nbytes;
    }
}

uint64_t write_gguf(const GgufFile& file, std::ostream& sink) {
    const uint32_t alignment = file.alignment();
    validate_for_write(file, alignment);

    Emitter e;
    e.raw(kMagic, 4);
    e.u32(file.version);
    e.u64(file.tensors.size());
    e.u64(file.metadata.size());
    for (const auto& [k, v] : file.metadata) {
        e.str(k);
        e.u32(static_cast<uint32_t>(v.type()));
        emit_value(e, v, 0);
    }
    for (const auto& t : file.tensors) {
        e.str(t.name);
        e.u32(static_cast<uint32_t>(t.dims.size()));
        for (uint64_t d : t.dims) e.u64(d);
        e.u32(t.type_id);
        e.u64(t.offset);
    }

    const uint64_t data_start = align_up(e.size(), alignment);
    const uint64_t pad = data_start - e.size();

    sink.write(reinterpret_cast<const char*>(e.bytes().data()),
               static_cast<std::streamsize>(e.size()));
    static const char zeros[64] = {};
    for (uint64_t left = pad; left > 0;) {
        const uint64_t chunk = std::min<uint64_t>(left, sizeof(zeros));
        sink.write(zeros, static_cast<std::streamsize>(chunk));
        left -= chunk;
    }
    if (!file.tensor_data.empty())
        sink.write(reinterpret_cast<const char*>(file.tensor_data.data()),
                   static_cast<std::streamsize>(file.tensor_data.size()));
    if (!sink) throw Error("gguf: write failed");
    return data_start + file.tensor_data.size();
}

uint64_t write_gguf_file(const GgufFile& file, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("gguf: cannot open \"" + path + "\" for writing");
    const uint64_t n = write_gguf(file, out);
    out.close();
    if (!out) throw Error("gguf: write to \"" + path + "\" failed");
    return n;
}

// ---- reader ----

namespace {

class Cursor {
public:
    Cursor(const uint8_t* p, size_t n) : p_(p), n_(n) {}

    size_t pos() const { return pos_; }
    size_t remaining() const { return n_ - pos_; }

    void need(uint64_t k, const std::string& field) {
        if (remaining() < k)
            throw CorruptionError("gguf: truncated while reading " + field);
    }
    uint8_t u8(const std::string& field) {
        need(1, field);
        return p_[pos_++];
    }
    uint16_t u16(const std::string& field) { return static_cast<uint16_t>(le(2, field)); }
    uint32_t u32(const std::string& field) { return static_cast<uint32_t>(le(4, field)); }
    uint64_t u64(const std::string& field) { return le(8, field); }
    float f32(const std::string& field) {
        const uint32_t b = u32(field);
        float v;
        std::memcpy(&v, &b, 4);
        return v;
    }
    double f64(const std::string& field) {
        const uint64_t b = u64(field);
        double v;
        std::memcpy(&v, &b, 8);
        return v;
    }
    std::string str(const std::string& field) {
        const uint64_t len = u64(field + " length");
        need(len, field);
        std::string s(reinterpret_cast<const char*>(p_ + pos_), len);
        pos_ += len;
        return s;
    }
    void skip_to(size_t target, const std::string& field) {
        if (target < pos_ || target > n_)
            throw CorruptionError("gguf: truncated while reading " + field);
        pos_ = target;
    }
    const uint8_t* here() const { return p_ + pos_; }

private:
    uint64_t le(int width, const std::string& field) {
        need(width, field);
        uint64_t v = 0;
        for (int i = 0; i < width; ++i) v |= static_cast<uint64_t>(p_[pos_ + i]) << (8 * i);
        pos_ += width;
        return v;
    }
    const uint8_t* p_;
    size_t n_;
    size_t pos_ = 0;
};

GgufMetadataValue parse_value(Cursor& c, uint32_t type_id, const std::string& key, int depth) {
    if (depth > kMaxArrayDepth)
        throw CorruptionError("gguf: metadata array nesting too deep in \"" + key + "\"");
    switch (static_cast<GgufValueType>(type_id)) {
        case GgufValueType::UInt8: return GgufMetadataValue(c.u8(key));
        case GgufValueType::Int8: return GgufMetadataValue(static_cast<int8_t>(c.u8(key)));
        case GgufValueType::UInt16: return GgufMetadataValue(c.u16(key));
        case GgufValueType::Int16: return GgufMetadataValue(static_cast<int16_t>(c.u16(key)));
        case GgufValueType::UInt32: return GgufMetadataValue(c.u32(key));
        case GgufValueType::Int32: return GgufMetadataValue(static_cast<int32_t>(c.u32(key)));
        case GgufValueType::Float32: return GgufMetadataValue(c.f32(key));
        case GgufValueType::Bool: return GgufMetadataValue(c.u8(key) != 0);
        case GgufValueType::String: return GgufMetadataValue(c.str("metadata value of \"" + key + "\""));
        case GgufValueType::Array: {
            const uint32_t elem_id = c.u32("array element type of \"" + key + "\"");
            if (elem_id > 12)
                throw CorruptionError("gguf: unknown array element type " + std::to_string(elem_id) +
                                      " in \"" + key + "\"");
            const uint64_t count = c.u64("array length of \"" + key + "\"");
            if (count > c.remaining())
                throw CorruptionError("gguf: array length " + std::to_string(count) + " in \"" + key +
                                      "\" exceeds remaining file size");
            GgufMetadataValue::Array items;
            items.reserve(count);
            for (uint64_t i = 0; i < count; ++i)
                items.push_back(parse_value(c, elem_id, key, depth + 1));
            return GgufMetadataValue::array(static_cast<GgufValueType>(elem_id), std::move(items));
        }
        case GgufValueType::UInt64: return GgufMetadataValue(c.u64(key));
        case GgufValueType::Int64: return GgufMetadataValue(static_cast<int64_t>(c.u64(key)));
        case GgufValueType::Float64: return GgufMetadataValue(c.f64(key));
    }
    throw CorruptionError("gguf: unknown metadata value type " + std::to_string(type_id) + " for \"" +
                          key + "\"");
}

} // namespace

GgufFile read_gguf(std::istream& source) {
    std::vector<uint8_t> buf;
    {
        std::ostringstream tmp;
        tmp << source.rdbuf();
        const std::string s = std::move(tmp).str();
        buf.assign(s.begin(), s.end());
    }

    if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
        throw FormatError("gguf: bad magic (not a GGUF file)");

    Cursor c(buf.data(), buf.size());
    c.skip_to(4, "magic");

    GgufFile file;
    file.version = c.u32("version");
    if (file.version != 3)
        throw VersionError("gguf: unsupported version " + std::to_string(file.version) +
                           " (only version 3 is supported)");
    const uint64_t n_tensors = c.u64("tensor count");
    const uint64_t n_kv = c.u64("metadata count");
    if (n_tensors > kMaxSaneCount) throw CorruptionError("gguf: implausible tensor count");
    if (n_kv > kMaxSaneCount) throw CorruptionError("gguf: implausible metadata count");

    std::unordered_set<std::string> keys;
    for (uint64_t i = 0; i < n_kv; ++i) {
        std::string key = c.str("metadata key");
        if (!keys.insert(key).second)
            throw CorruptionError("gguf: duplicate metadata key \"" + key + "\"");
        const uint32_t type_id = c.u32("metadata value type of \"" + key + "\"");
        file.metadata.emplace_back(key, parse_value(c, type_id, key, 0));
    }

    const uint32_t alignment = file.alignment();

    std::unordered_set<std::string> names;
    for (uint64_t i = 0; i < n_tensors; ++i) {
        GgufTensorInfo info;
        info.name = c.str("tensor name");
        if (!names.insert(info.name).second)
            throw CorruptionError("gguf: duplicate tensor name \"" + info.name + "\"");
        const uint32_t n_dims = c.u32("dimension count of \"" + info.name + "\"");
        if (n_dims == 0 || n_dims > kMaxSaneDims)
            throw CorruptionError("gguf: implausible dimension count for \"" + info.name + "\"");
        uint64_t product = 1;
        for (uint32_t d = 0; d < n_dims; ++d) {
            const uint64_t dim = c.u64("dimension of \"" + info.name + "\"");
            if (dim == 0) throw CorruptionError("gguf: zero dimension in \"" + info.name + "\"");
            if (product > std::numeric_limits<uint64_t>::max() / dim)
                throw CorruptionError("gguf: dimension overflow in \"" + info.name + "\"");
            product *= dim;
            info.dims.push_back(dim);
        }
        info.type_id = c.u32("type of \"" + info.name + "\"");
        info.offset = c.u64("offset of \"" + info.name + "\"");
        if (info.offset % alignment != 0)
            throw CorruptionError("gguf: offset of \"" + info.name + "\" (" +
                                  std::to_string(info.offset) + ") not aligned to " +
                                  std::to_string(alignment));
        if (!file.tensors.empty() && info.offset <= file.tensors.back().offset)
            throw CorruptionError("gguf: tensor offsets not ascending at \"" + info.name + "\"");
        file.tensors.push_back(std::move(info));
    }

    const uint64_t data_start = align_up(c.pos(), alignment);
    if (data_start > buf.size()) {
        if (n_tensors > 0)
            throw CorruptionError("gguf: truncated before tensor data region");
        file.tensor_data.clear();
        return file;
    }
    file.tensor_data.assign(buf.begin() + static_cast<ptrdiff_t>(data_start), buf.end());

    const uint64_t data_size = file.tensor_data.size();
    for (size_t i = 0; i < file.tensors.size(); ++i) {
        GgufTensorInfo& t = file.tensors[i];
        if (t.offset > data_size)
            throw CorruptionError("gguf: offset of \"" + t.name + "\" outside the data region");
        if (auto qt = quant_type_from_ggml(t.type_id)) {
            const BlockGeometry g = geometry(*qt);
            if (t.dims[0] % static_cast<uint64_t>(g.block_elems) != 0)
                throw CorruptionError("gguf: row length of \"" + t.name + "\" (" +
                                      std::to_string(t.dims[0]) + ") not divisible by block size " +
                                      std::to_string(g.block_elems));
            t.nbytes = t.dims[0] / g.block_elems * g.block_bytes;
            for (size_t d = 1; d < t.dims.size(); ++d) t.nbytes *= t.dims[d];
        } else {
            const uint64_t end = i + 1 < file.tensors.size() ? file.tensors[i + 1].offset : data_size;
            t.nbytes = end - t.offset;  // opaque: sized by its offset gap
            log_info("gguf: tensor \"" + t.name + "\" has unknown type id " +
                     std::to_string(t.type_id) + "; exposing as opaque bytes");
        }
        if (t.offset + t.nbytes > data_size)
            throw CorruptionError("gguf: tensor \"" + t.name + "\" extends past the data region");
        if (i + 1 < file.tensors.size() && t.offset + t.nbytes > file.tensors[i + 1].offset)
            throw CorruptionError("gguf: tensor \"" + t.name + "\" overlaps \"" +
                                  file.tensors[i + 1].name + "\"");
    }
    return file;
}

GgufFile read_gguf_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("gguf: cannot open \"" + path + "\"");
    return read_gguf(in);
}

// ---- packing ----

static uint32_t compute_file_type(const std::vector<std::pair<int, QuantType>>& dims_types) {
    // dominant storage type among matrix tensors, by count; first seen wins ties
    std::vector<std::pair<QuantType, int>> counts;
    auto bump = [&counts](QuantType t) {
        for (auto& [qt, n] : counts)
            if (qt == t) {
                ++n;
                return;
            }
        counts.emplace_back(t, 1);
    };
    for (const auto& [ndims, t] : dims_types)
        if (ndims >= 2) bump(t);
    if (counts.empty())
        for (const auto& [ndims, t] : dims_types) {
            (void)ndims;
            bump(t);
        }
    QuantType dominant = QuantType::F32;
    int best = 0;
    for (const auto& [t, n] : counts)
        if (n > best) {
            best = n;
            dominant = t;
        }
    switch (dominant) {
        case QuantType::F32: return 0;   // ALL_F32
        case QuantType::F16: return 1;   // MOSTLY_F16
        case QuantType::Q8_0: return 7;  // MOSTLY_Q8_0
        case QuantType::Q4_K: return 15; // MOSTLY_Q4_K_M
        case QuantType::Q6_K: return 18; // MOSTLY_Q6_K
        case QuantType::BF16: return 32; // MOSTLY_BF16
        case QuantType::NF4: return 15;  // size accounting only; NF4 is never packed
    }
    return 0;
}

std::vector<std::pair<std::string, GgufMetadataValue>> standard_metadata(
    const ModelManifest& manifest, const std::vector<std::pair<int, QuantType>>& dims_types) {
    bool any_quant = false;
    for (const auto& [ndims, t] : dims_types) {
        (void)ndims;
        if (t == QuantType::Q8_0 || t == QuantType::Q4_K || t == QuantType::Q6_K ||
            t == QuantType::NF4)
            any_quant = true;
    }

    std::string arch = "llama";
    for (const auto& [k, v] : manifest.metadata)
        if (k == "general.architecture") arch = v;

    std::vector<std::pair<std::string, GgufMetadataValue>> md;
    md.emplace_back("general.architecture", GgufMetadataValue::of_string(arch));
    md.emplace_back("general.name", GgufMetadataValue::of_string(
                                        manifest.model_name.empty() ? "model" : manifest.model_name));
    md.emplace_back("general.file_type", GgufMetadataValue::of_u32(compute_file_type(dims_types)));
    if (any_quant)
        md.emplace_back("general.quantization_version", GgufMetadataValue::of_u32(2));
    md.emplace_back("general.alignment", GgufMetadataValue::of_u32(32));

    static const char* reserved[] = {"general.architecture", "general.name", "general.file_type",
                                     "general.quantization_version", "general.alignment"};
    for (const auto& [k, v] : manifest.metadata) {
        bool skip = false;
        for (const char* r : reserved) skip = skip || k == r;
        if (!skip) md.emplace_back(k, GgufMetadataValue::of_string(v));
    }
    return md;
}

GgufFile pack_model(const std::vector<TensorView>& tensors, const ModelManifest& manifest) {
    std::vector<std::pair<int, QuantType>> dims_types;
    dims_types.reserve(tensors.size());
    for (const auto& t : tensors) {
        t.validate();
        if (t.dtype == QuantType::NF4)
            throw UnsupportedTypeError(
                "tensor \"" + t.name +
                "\" is NF4, which GGUF cannot store; dequantize and requantize to a "
                "GGUF type first (the staged pipeline mode does this)");
        dims_types.emplace_back(static_cast<int>(t.shape.size()), t.dtype);
    }

    GgufFile file;
    file.version = 3;
    file.metadata = standard_metadata(manifest, dims_types);

    uint64_t offset = 0;
    for (const auto& t : tensors) {
        GgufTensorInfo info;
        info.name = t.name;
        info.dims.assign(t.shape.rbegin(), t.shape.rend());
        info.type_id = ggml_type_id(t.dtype);
        info.offset = offset;
        info.nbytes = t.data.size();
        file.tensors.push_back(std::move(info));
        offset += align_up(t.data.size(), 32);
    }
    file.tensor_data.assign(offset, 0);
    for (size_t i = 0; i < tensors.size(); ++i)
        if (!tensors[i].data.empty())
            std::memcpy(file.tensor_data.data() + file.tensors[i].offset, tensors[i].data.data(),
                        tensors[i].data.size());
    return file;
}

uint64_t estimate_gguf_size(const ModelManifest& manifest,
                            const std::vector<TypeAssignment>& assignments) {
    if (assignments.size() != manifest.entries.size())
        throw std::invalid_argument("estimate: assignment list does not match the manifest");

    std::vector<std::pair<int, QuantType>> dims_types;
    dims_types.reserve(assignments.size());
    for (size_t i = 0; i < assignments.size(); ++i)
        dims_types.emplace_back(static_cast<int>(manifest.entries[i].shape.size()),
                                assignments[i].type);

    uint64_t bytes = 4 + 4 + 8 + 8;  // magic, version, tensor count, kv count
    for (const auto& [k, v] : standard_metadata(manifest, dims_types)) bytes += kv_bytes(k, v);
    for (const auto& e : manifest.entries) bytes += info_bytes(e.name, e.shape.size());

    uint64_t total = align_up(bytes, 32);
    for (size_t i = 0; i < assignments.size(); ++i)
        total += align_up(
            static_cast<uint64_t>(entry_stored_bytes(manifest.entries[i].shape, assignments[i].type)),
            32);
    return total;
}

} // namespace quantforge
