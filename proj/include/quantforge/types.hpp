#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace quantforge {

enum class ScalarType : uint8_t { F32, F16, BF16 };

enum class QuantType : uint8_t { F32, F16, BF16, Q8_0, Q4_K, Q6_K, NF4 };

constexpr int scalar_bits(ScalarType t) { return t == ScalarType::F32 ? 32 : 16; }
constexpr int scalar_bytes(ScalarType t) { return scalar_bits(t) / 8; }

struct BlockGeometry {
    int64_t block_elems;
    int64_t block_bytes;
};

constexpr BlockGeometry geometry(QuantType t) {
    switch (t) {
        case QuantType::F32:  return {1, 4};
        case QuantType::F16:  return {1, 2};
        case QuantType::BF16: return {1, 2};
        case QuantType::Q8_0: return {32, 34};
        case QuantType::Q4_K: return {256, 144};
        case QuantType::Q6_K: return {256, 210};
        case QuantType::NF4:  return {64, 36};
    }
    return {1, 4};
}

constexpr double bits_per_weight(QuantType t) {
    const BlockGeometry g = geometry(t);
    return 8.0 * static_cast<double>(g.block_bytes) / static_cast<double>(g.block_elems);
}

constexpr bool is_block_type(QuantType t) {
    return geometry(t).block_elems > 1;
}

const char* to_string(ScalarType t);
const char* to_string(QuantType t);
ScalarType scalar_type_from_string(const std::string& s);
QuantType quant_type_from_string(const std::string& s);
QuantType to_quant_type(ScalarType t);

// A named n-dimensional array. Shape is row-major; the last dimension is
// the contiguous row that block formats subdivide.
struct TensorView {
    std::string name;
    std::vector<int64_t> shape;
    QuantType dtype = QuantType::F32;
    std::vector<uint8_t> data;

    int64_t elem_count() const;
    int64_t row_length() const;      // last dimension
    int64_t row_count() const;       // product of the others
    int64_t expected_bytes() const;  // row_count * (row_length / block_elems) * block_bytes
    void validate() const;           // throws std::invalid_argument
};

struct ManifestEntry {
    std::string name;
    std::vector<int64_t> shape;
    ScalarType dtype = ScalarType::F32;

    int64_t elem_count() const;
    int64_t byte_count() const { return elem_count() * scalar_bytes(dtype); }
};

struct ModelManifest {
    std::string model_name;
    std::vector<ManifestEntry> entries;
    std::vector<std::pair<std::string, std::string>> metadata;  // order preserved

    int64_t total_params() const;
    void validate() const;  // unique names, positive dims; throws std::invalid_argument

    std::string to_json() const;
    static ModelManifest from_json(const std::string& text);  // throws FormatError
};

struct PlanRule {
    std::string pattern;  // glob: '*' and '?'
    QuantType type;
};

// Maps tensor names to storage types. First matching rule wins; unmatched
// tensors get default_type. keep_source plans assign every tensor its
// manifest dtype and skip the 1-D pin (the "identity" built-in).
struct QuantPlan {
    std::string name;
    QuantType default_type = QuantType::Q4_K;
    std::vector<PlanRule> rules;
    bool keep_source = false;

    std::string to_json() const;
    static QuantPlan from_json(const std::string& text);  // throws std::invalid_argument
};

enum class AssignReason : uint8_t {
    Rule,         // a plan rule matched
    Default,      // plan default type
    Source,       // keep-source plan
    Norm1D,       // 1-D tensor pinned to F32
    Divisibility, // row length not divisible by block size; F16 fallback
};

const char* to_string(AssignReason r);

struct TypeAssignment {
    std::string name;
    QuantType type;
    AssignReason reason;

    bool operator==(const TypeAssignment&) const = default;
};

// Case-sensitive glob match supporting '*' and '?'.
bool glob_match(const std::string& pattern, const std::string& text);

// Deterministic, total over valid manifests. 1-D tensors are pinned to F32
// (block formats need divisible rows); block-typed tensors whose row length
// is not divisible by the block size fall back to F16, recorded.
std::vector<TypeAssignment> assign_types(const ModelManifest& manifest, const QuantPlan& plan);

// Stored bytes for `elems` elements of type `t`; requires divisibility.
int64_t stored_bytes(QuantType t, int64_t elems);

} // namespace quantforge
