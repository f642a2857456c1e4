// See ref_dequant.h for provenance. Routine bodies are verbatim upstream
// code; do not "improve" them.

#include "ref_dequant.h"

#include <cassert>
#include <cmath>
#include <cstdint>

namespace refdq {

// github.com/cortexLLM/cortexLLM
/**
 * Convert FP16 to FP32
 * Handles special cases: zero, denormal, infinity, NaN
 */
float fp16_to_fp32(ggml_half h) {
    uint32_t sign = (h >> 15) & 0x1;
    uint32_t exp = (h >> 10) & 0x1f;
    uint32_t mantissa = h & 0x3ff;

    if (exp == 0) {
        if (mantissa == 0) {
            return sign ? -0.0f : 0.0f;
        } else {
            // Denormal number
            return (sign ? -1.0f : 1.0f) * (float)mantissa / (1 << 10) / (1 << 14);
        }
    } else if (exp == 31) {
        // Infinity or NaN
        return mantissa == 0 ? (sign ? -INFINITY : INFINITY) : NAN;
    } else {
        // Normal number
        union { uint32_t i; float f; } u;
        u.i = (sign << 31) | ((exp + 112) << 23) | (mantissa << 13);
        return u.f;
    }
}

// github.com/cortexLLM/cortexLLM
/**
 * Dequantize Q8_0 blocks to float array
 */
void dequantize_q8_0(const void* src, float* dst, int n_elements) {
    const block_q8_0* blocks = (const block_q8_0*)src;
    int n_blocks = n_elements / QK8_0;
    for (int i = 0; i < n_blocks; i++) {
        float d = fp16_to_fp32(blocks[i].d);
        for (int j = 0; j < QK8_0; j++)
            dst[i * QK8_0 + j] = blocks[i].qs[j] * d;
    }
}

// github.com/rexbrahh/cieft
namespace {

inline void get_scale_min_k4(int j, const std::uint8_t* q, std::uint8_t* d, std::uint8_t* m) {
  if (j < 4) {
    *d = q[j] & 63;
    *m = q[j + 4] & 63;
  } else {
    *d = (q[j + 4] & 0xF) | ((q[j - 4] >> 6) << 4);
    *m = (q[j + 4] >> 4) | ((q[j - 0] >> 6) << 4);
  }
}

}  // namespace

// github.com/rexbrahh/cieft
void dequantize_row_q4_k(const block_q4_K* x, float* y, std::int64_t k) {
  assert(k % QK_K == 0);
  const int nb = static_cast<int>(k / QK_K);

  for (int i = 0; i < nb; i++) {
    const std::uint8_t* q = x[i].qs;

    const float d = fp16_to_fp32(x[i].d);
    const float min = fp16_to_fp32(x[i].dmin);

    int is = 0;
    std::uint8_t sc = 0;
    std::uint8_t m = 0;
    for (int j = 0; j < QK_K; j += 64) {
      get_scale_min_k4(is + 0, x[i].scales, &sc, &m);
      const float d1 = d * sc;
      const float m1 = min * m;
      get_scale_min_k4(is + 1, x[i].scales, &sc, &m);
      const float d2 = d * sc;
      const float m2 = min * m;

      for (int l = 0; l < 32; ++l) {
        *y++ = d1 * (q[l] & 0xF) - m1;
      }
      for (int l = 0; l < 32; ++l) {
        *y++ = d2 * (q[l] >> 4) - m2;
      }
      q += 32;
      is += 2;
    }
  }
}

// github.com/rexbrahh/cieft
void dequantize_row_q6_k(const block_q6_K* x, float* y, std::int64_t k) {
  assert(k % QK_K == 0);
  const std::int64_t nb = k / QK_K;

  for (std::int64_t i = 0; i < nb; i++) {
    const float d = fp16_to_fp32(x[i].d);

    const std::uint8_t* ql = x[i].ql;
    const std::uint8_t* qh = x[i].qh;
    const std::int8_t* sc = x[i].scales;

    for (int n = 0; n < QK_K; n += 128) {
      for (int l = 0; l < 32; ++l) {
        const int is = l / 16;
        const std::int8_t q1 = static_cast<std::int8_t>((ql[l + 0] & 0xF) | (((qh[l] >> 0) & 3) << 4)) - 32;
        const std::int8_t q2 = static_cast<std::int8_t>((ql[l + 32] & 0xF) | (((qh[l] >> 2) & 3) << 4)) - 32;
        const std::int8_t q3 = static_cast<std::int8_t>((ql[l + 0] >> 4) | (((qh[l] >> 4) & 3) << 4)) - 32;
        const std::int8_t q4 = static_cast<std::int8_t>((ql[l + 32] >> 4) | (((qh[l] >> 6) & 3) << 4)) - 32;

        y[l + 0] = d * sc[is + 0] * q1;
        y[l + 32] = d * sc[is + 2] * q2;
        y[l + 64] = d * sc[is + 4] * q3;
        y[l + 96] = d * sc[is + 6] * q4;
      }
      y += 128;
      ql += 64;
      qh += 32;
      sc += 8;
    }
  }
}

} // namespace refdq
