#pragma once

#include "quantforge/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace quantforge {

// Single-file tensor container: 8-byte little-endian header length, UTF-8
// JSON header (tensor name -> dtype/shape/data_offsets, optional
// "__metadata__"), then the raw little-endian data region.

struct StEntry {
    std::string name;
    ScalarType dtype = ScalarType::F32;
    std::vector<int64_t> shape;
    uint64_t begin = 0;  // into the data region
    uint64_t end = 0;
};

// Lazy accessor: the header is parsed once; tensor bytes are read on demand
// with an independent stream per call, so concurrent reads of distinct
// tensors are safe. Never materializes the whole file.
class StContainer {
public:
    static StContainer open(const std::string& path);

    const ModelManifest& manifest() const { return manifest_; }
    const std::vector<StEntry>& entries() const { return entries_; }
    const StEntry& entry(const std::string& name) const;

    // raw bytes in the source dtype
    std::vector<uint8_t> tensor_bytes(const std::string& name) const;
    // up-converted to float32 for quantization input
    std::vector<float> tensor_f32(const std::string& name) const;

private:
    std::string path_;
    uint64_t data_begin_ = 0;  // file offset where the data region starts
    uint64_t data_size_ = 0;
    ModelManifest manifest_;
    std::vector<StEntry> entries_;
    std::unordered_map<std::string, size_t> index_;
};

// Deterministic Gaussian weights (mean 0, deviation 0.02) for every manifest
// entry; identical (manifest, seed) produce byte-identical containers.
void synth_fixture(const ModelManifest& manifest, uint64_t seed, std::ostream& sink);
void synth_fixture_file(const ModelManifest& manifest, uint64_t seed, const std::string& path);

// Per-tensor generator seed and the Gaussian stream it feeds; exposed so
// tests can verify determinism properties directly.
uint64_t fnv1a64(std::string_view s);
uint64_t tensor_seed(std::string_view name, uint64_t seed);
std::vector<float> gaussian_values(uint64_t stream_seed, size_t count, float stddev);

} // namespace quantforge
