#pragma once

#include <cstdint>
#include <span>

namespace quantforge {

// Affine quantization q = round(r/s) + z with round-half-away-from-zero
// and a saturating clamp to the integer range. Arithmetic is float32.
struct AffineParams {
    float scale = 1.0f;
    int32_t zero_point = 0;
    int bit_width = 8;   // 4 or 8
    bool signed_range = true;

    int32_t q_min() const { return signed_range ? -(1 << (bit_width - 1)) : 0; }
    int32_t q_max() const { return signed_range ? (1 << (bit_width - 1)) - 1 : (1 << bit_width) - 1; }
    void validate() const;  // throws std::invalid_argument
};

// Parameter selection from the data range. Asymmetric: s = (max-min)/(q_max-q_min),
// z = clamp(round(q_min - min/s)). Symmetric: s = absmax/q_max, z = 0.
// Constant input is degenerate: s = 1 and the zero point encodes the constant.
AffineParams compute_affine_params(std::span<const float> values, int bit_width, bool signed_range,
                                   bool symmetric);

int32_t quantize_affine(float r, const AffineParams& params);
float dequantize_affine(int32_t q, const AffineParams& params);

// round half away from zero, as a float32 operation
float round_away(float v);

} // namespace quantforge
