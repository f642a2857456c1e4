#pragma once

#include "quantforge/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace quantforge {

// GGUF v3: little-endian, magic "GGUF", metadata key/values, tensor info
// table, zero-padded alignment, tensor data region.

enum class GgufValueType : uint32_t {
    UInt8 = 0,
    Int8 = 1,
    UInt16 = 2,
    Int16 = 3,
    UInt32 = 4,
    Int32 = 5,
    Float32 = 6,
    Bool = 7,
    String = 8,
    Array = 9,
    UInt64 = 10,
    Int64 = 11,
    Float64 = 12,
};

struct GgufMetadataValue {
    using Array = std::vector<GgufMetadataValue>;
    // variant index == wire type id
    using Storage = std::variant<uint8_t, int8_t, uint16_t, int16_t, uint32_t, int32_t, float,
                                 bool, std::string, Array, uint64_t, int64_t, double>;
    Storage value;
    GgufValueType elem_type = GgufValueType::Int32;  // element type for (possibly empty) arrays

    GgufMetadataValue() : value(int32_t{0}) {}
    GgufMetadataValue(Storage v) : value(std::move(v)) {}
    static GgufMetadataValue of_string(std::string s) { return GgufMetadataValue(Storage(std::move(s))); }
    static GgufMetadataValue of_u32(uint32_t v) { return GgufMetadataValue(Storage(v)); }
    static GgufMetadataValue array(GgufValueType elem, Array items);

    GgufValueType type() const { return static_cast<GgufValueType>(value.index()); }
    bool operator==(const GgufMetadataValue& other) const;

    // human-readable rendering for listings
    std::string to_display() const;
};

// ggml storage type ids used on the wire
inline constexpr uint32_t kGgmlF32 = 0;
inline constexpr uint32_t kGgmlF16 = 1;
inline constexpr uint32_t kGgmlQ8_0 = 8;
inline constexpr uint32_t kGgmlQ4_K = 12;
inline constexpr uint32_t kGgmlQ6_K = 14;
inline constexpr uint32_t kGgmlBF16 = 30;

uint32_t ggml_type_id(QuantType t);  // throws UnsupportedTypeError for NF4
std::optional<QuantType> quant_type_from_ggml(uint32_t id);
std::string ggml_type_display(uint32_t id);  // "Q4_K", or "unknown(n)" for foreign ids

struct GgufTensorInfo {
    std::string name;
    std::vector<uint64_t> dims;  // file order: contiguous (innermost) dimension first
    uint32_t type_id = kGgmlF32;
    uint64_t offset = 0;  // into the tensor-data region; multiple of the alignment
    uint64_t nbytes = 0;  // stored byte length (derived on read, set by pack)

    uint64_t elem_count() const;
    // row-major shape as used by TensorView (reverse of dims)
    std::vector<int64_t> shape() const;
    bool operator==(const GgufTensorInfo& other) const;
};

struct GgufFile {
    uint32_t version = 3;
    std::vector<std::pair<std::string, GgufMetadataValue>> metadata;  // insertion order
    std::vector<GgufTensorInfo> tensors;
    std::vector<uint8_t> tensor_data;  // the whole aligned data region

    uint32_t alignment() const;  // "general.alignment" metadata, default 32
    const GgufMetadataValue* find_metadata(const std::string& key) const;
    std::span<const uint8_t> tensor_bytes(const GgufTensorInfo& info) const;
    bool operator==(const GgufFile& other) const;
};

// Validates, then emits header, metadata, tensor infos, zero padding and the
// data region. Returns the byte count (the file size used in size reports).
uint64_t write_gguf(const GgufFile& file, std::ostream& sink);
uint64_t write_gguf_file(const GgufFile& file, const std::string& path);

// Parses and validates. Throws FormatError (magic), VersionError,
// CorruptionError (truncation, overlap, misalignment; names the field).
// Unknown ggml type ids become opaque tensors sized by their offset gap.
GgufFile read_gguf(std::istream& source);
GgufFile read_gguf_file(const std::string& path);

// Assembles a GgufFile from quantized tensors in the given order, with
// canonical metadata. NF4 tensors are rejected with UnsupportedTypeError.
GgufFile pack_model(const std::vector<TensorView>& tensors, const ModelManifest& manifest);

// The canonical metadata pack_model emits, derivable from a manifest and a
// type assignment alone (no weights), so size estimates match packed files.
std::vector<std::pair<std::string, GgufMetadataValue>> standard_metadata(
    const ModelManifest& manifest, const std::vector<std::pair<int, QuantType>>& dims_types);

// Exact on-disk size of the GGUF that pack_model + write_gguf would produce
// for this manifest and assignment. NF4 assignments are sized with the same
// layout rules (used for stage-size accounting, never written).
uint64_t estimate_gguf_size(const ModelManifest& manifest,
                            const std::vector<TypeAssignment>& assignments);

uint64_t align_up(uint64_t v, uint64_t alignment);

} // namespace quantforge
