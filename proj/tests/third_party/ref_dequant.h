// Independent GGUF k-quant dequantization routines, vendored for
// cross-validation against this project's implementation. The routine bodies
// are carried over verbatim from their upstream projects; only the block
// struct definitions and the namespace wrapper are local:
//
//   fp16_to_fp32, dequantize_q8_0   github.com/cortexLLM/cortexLLM (main.cpp)
//   get_scale_min_k4, q4_K          github.com/rexbrahh/cieft (dequant_q4_k.cpp)
//   q6_K                            github.com/rexbrahh/cieft (dequant_q6_k.cpp)
//
// Keep these byte-for-byte faithful to upstream: their value is that they
// were written by someone else.
#pragma once

#include <cstdint>

namespace refdq {

typedef uint16_t ggml_half;

constexpr int QK_K = 256;
constexpr int QK8_0 = 32;

typedef struct {
    ggml_half d;       // Scale factor (FP16)
    int8_t qs[QK8_0];  // Quantized values (32 elements per block)
} block_q8_0;

typedef struct {
    ggml_half d;         // super-block scale for quantized scales
    ggml_half dmin;      // super-block scale for quantized mins
    uint8_t scales[12];  // scales and mins, quantized with 6 bits
    uint8_t qs[QK_K / 2];  // 4-bit quants
} block_q4_K;

typedef struct {
    uint8_t ql[QK_K / 2];      // quants, lower 4 bits
    uint8_t qh[QK_K / 4];      // quants, upper 2 bits
    int8_t scales[QK_K / 16];  // scales, quantized with 8 bits
    ggml_half d;               // super-block scale
} block_q6_K;

static_assert(sizeof(block_q8_0) == 34, "wire layout");
static_assert(sizeof(block_q4_K) == 144, "wire layout");
static_assert(sizeof(block_q6_K) == 210, "wire layout");

float fp16_to_fp32(ggml_half h);

void dequantize_q8_0(const void* src, float* dst, int n_elements);
void dequantize_row_q4_k(const block_q4_K* x, float* y, std::int64_t k);
void dequantize_row_q6_k(const block_q6_K* x, float* y, std::int64_t k);

} // namespace refdq
