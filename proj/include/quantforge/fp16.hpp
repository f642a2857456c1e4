#pragma once

#include <bit>
#include <cmath>
#include <cstdint>

namespace quantforge {

// IEEE 754 binary16 and bfloat16 conversions. Round-to-nearest-even on
// narrowing; finite values beyond the half range saturate to +-65504
// rather than producing infinity.

inline float f16_to_f32(uint16_t h) {
    const uint32_t sign = static_cast<uint32_t>(h & 0x8000u) << 16;
    const uint32_t exp = (h >> 10) & 0x1Fu;
    const uint32_t mant = h & 0x3FFu;
    uint32_t bits;
    if (exp == 0) {
        if (mant == 0) {
            bits = sign;
            return std::bit_cast<float>(bits);
        }
        // subnormal half: mant * 2^-24
        float v = std::ldexp(static_cast<float>(mant), -24);
        return sign ? -v : v;
    }
    if (exp == 31) {
        bits = sign | 0x7F800000u | (mant << 13);
        return std::bit_cast<float>(bits);
    }
    bits = sign | ((exp + 112) << 23) | (mant << 13);
    return std::bit_cast<float>(bits);
}

inline uint16_t f32_to_f16(float f) {
    const uint32_t bits = std::bit_cast<uint32_t>(f);
    const uint16_t sign = static_cast<uint16_t>((bits >> 16) & 0x8000u);
    const uint32_t abs = bits & 0x7FFFFFFFu;

    if (abs > 0x7F800000u) return sign | 0x7E00u;        // NaN -> quiet NaN
    if (abs >= 0x47800000u) return sign | 0x7BFFu;       // >= 65536: saturate
    if (abs >= 0x38800000u) {
        // normal half range; check rounding overflow past 65504
        uint32_t mant = abs & 0x7FFFFFu;
        uint32_t exp = (abs >> 23) - 112;
        uint32_t half = (exp << 10) | (mant >> 13);
        const uint32_t rest = mant & 0x1FFFu;
        if (rest > 0x1000u || (rest == 0x1000u && (half & 1u))) half++;
        if (half >= 0x7C00u) half = 0x7BFFu;             // rounded past max finite
        return sign | static_cast<uint16_t>(half);
    }
    if (abs < 0x33000000u) return sign;                  // below half of min subnormal
    // subnormal half: value = mant24 * 2^(exp-150), target unit 2^-24
    const uint32_t exp = abs >> 23;
    const uint64_t mant = (abs & 0x7FFFFFu) | 0x800000u;
    const uint32_t shift = 126 - exp;                    // 14..24
    const uint64_t q = mant >> shift;
    const uint64_t rem = mant & ((uint64_t{1} << shift) - 1);
    const uint64_t mid = uint64_t{1} << (shift - 1);
    uint64_t half = q;
    if (rem > mid || (rem == mid && (q & 1u))) half++;
    return sign | static_cast<uint16_t>(half);
}

inline float bf16_to_f32(uint16_t b) {
    return std::bit_cast<float>(static_cast<uint32_t>(b) << 16);
}

inline uint16_t f32_to_bf16(float f) {
    uint32_t bits = std::bit_cast<uint32_t>(f);
    if ((bits & 0x7FFFFFFFu) > 0x7F800000u)              // NaN: keep quiet, drop payload tail
        return static_cast<uint16_t>((bits >> 16) | 0x0040u);
    const uint32_t lsb = (bits >> 16) & 1u;
    bits += 0x7FFFu + lsb;                               // round to nearest even
    return static_cast<uint16_t>(bits >> 16);
}

} // namespace quantforge
