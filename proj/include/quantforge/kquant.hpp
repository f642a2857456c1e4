#pragma once

#include "quantforge/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace quantforge {

// GGUF-family block formats with ecosystem bit layouts. All scales are
// IEEE half precision stored as raw uint16. Structs mirror the wire layout
// exactly (packed, little-endian scalars).

#pragma pack(push, 1)
struct BlockQ8_0 {
    uint16_t d;        // half: scale
    int8_t qs[32];     // codes, value = d * q
};
static_assert(sizeof(BlockQ8_0) == 34);

struct BlockQ4_K {
    uint16_t d;        // half: super-scale for the eight 6-bit sub-scales
    uint16_t dmin;     // half: super-scale for the eight 6-bit sub-minimums
    uint8_t scales[12];
    uint8_t qs[128];   // 4-bit codes, value = d*sc*q - dmin*m
};
static_assert(sizeof(BlockQ4_K) == 144);

struct BlockQ6_K {
    uint8_t ql[128];   // low 4 bits of the codes
    uint8_t qh[64];    // high 2 bits
    int8_t scales[16]; // per-16-element sub-scales
    uint16_t d;        // half: super-scale, value = d * scale[i] * q, q in [-32, 31]
};
static_assert(sizeof(BlockQ6_K) == 210);
#pragma pack(pop)

inline constexpr int kSuperBlock = 256;

// 6-bit sub-scale/min packing for Q4_K (j = sub-block index 0..7).
void put_scale_min_k4(int j, uint8_t ls, uint8_t lm, uint8_t* scales);
void get_scale_min_k4(int j, const uint8_t* scales, uint8_t* sc, uint8_t* m);

// Sub-block (scale, min) selection for Q4_K: initialized from the range,
// refined with a fixed 3-iteration least-squares sweep over candidate
// roundings. Returned scale and min are non-negative.
struct ScaleMin {
    float scale;
    float min;
};
ScaleMin choose_q4k_scale_min(std::span<const float> sub_block);

// Row quantizers. Row lengths must be divisible by the block size; inputs
// must be finite. Zero blocks encode as all-zero bytes.
std::vector<uint8_t> quantize_q8_0(std::span<const float> row);
std::vector<uint8_t> quantize_q4_k(std::span<const float> row);
std::vector<uint8_t> quantize_q6_k(std::span<const float> row);

void dequantize_q8_0(std::span<const uint8_t> blocks, std::span<float> out);
void dequantize_q4_k(std::span<const uint8_t> blocks, std::span<float> out);
void dequantize_q6_k(std::span<const uint8_t> blocks, std::span<float> out);

// Scalar encodings (F32 little-endian, IEEE F16, BF16), round-to-nearest-even.
std::vector<uint8_t> convert_scalar(std::span<const float> row, QuantType target);

// Decode scalar bytes back to float32 values.
std::vector<float> scalar_to_f32(std::span<const uint8_t> data, QuantType source);

// Dispatch by type: quantize an f32 row to any QuantType, or decode any
// supported block/scalar payload back to f32.
std::vector<uint8_t> quantize_row(std::span<const float> row, QuantType target);
std::vector<float> dequantize_row(std::span<const uint8_t> data, QuantType source);

} // namespace quantforge
