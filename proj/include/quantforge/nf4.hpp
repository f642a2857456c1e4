#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace quantforge {

// 16-value Normal Float codebook: standard-normal quantiles normalized to
// [-1, 1] with an exact zero at index 7. Strictly increasing.
struct Nf4Codebook {
    std::array<float, 16> values;
};

// 64 elements stored as a float32 absmax plus 32 packed code bytes
// (low nibble = even element): 36 bytes, 4.5 bits per weight.
inline constexpr int kNf4BlockElems = 64;
inline constexpr int kNf4BlockBytes = 36;

const Nf4Codebook& nf4_codebook();

// Widest gap between adjacent codebook values (the round-trip error bound
// per element is absmax * widest_gap / 2).
float nf4_widest_gap();

// Inverse standard normal CDF, |error| < 1e-14 over (0, 1).
double inverse_normal_cdf(double p);

// Nearest codebook index for a normalized value in [-1, 1]; ties resolve
// to the lower index.
int nf4_nearest_code(float normalized);

// row.size() must be a multiple of 64; returns row.size()/64 * 36 bytes.
std::vector<uint8_t> quantize_nf4(std::span<const float> row);

void dequantize_nf4(std::span<const uint8_t> blocks, std::span<float> out);
std::vector<float> dequantize_nf4(std::span<const uint8_t> blocks);

} // namespace quantforge
