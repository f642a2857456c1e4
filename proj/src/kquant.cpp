#include "quantforge/kquant.hpp"

#include "quantforge/affine.hpp"
#include "quantforge/fp16.hpp"
#include "quantforge/nf4.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace quantforge {

static void check_row(std::span<const float> row, int64_t block_elems, const char* fmt) {
    if (row.size() % static_cast<size_t>(block_elems) != 0)
        throw std::invalid_argument(std::string(fmt) + ": row length " + std::to_string(row.size()) +
                                    " not divisible by " + std::to_string(block_elems));
    for (float v : row)
        if (!std::isfinite(v)) throw std::range_error(std::string(fmt) + ": non-finite input value");
}

static int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// ---- Q8_0 ----

std::vector<uint8_t> quantize_q8_0(std::span<const float> row) {
    check_row(row, 32, "q8_0");
    const size_t n_blocks = row.size() / 32;
    std::vector<uint8_t> out(n_blocks * sizeof(BlockQ8_0));
    for (size_t b = 0; b < n_blocks; ++b) {
        const float* x = row.data() + b * 32;
        float amax = 0.0f;
        for (int i = 0; i < 32; ++i) amax = std::max(amax, std::fabs(x[i]));
        BlockQ8_0 blk{};
        if (amax > 0.0f) {
            const uint16_t d16 = f32_to_f16(amax / 127.0f);
            const float d = f16_to_f32(d16);
            if (d > 0.0f) {
                blk.d = d16;
                const float inv = 1.0f / d;
                for (int i = 0; i < 32; ++i)
                    blk.qs[i] = static_cast<int8_t>(clampi(
                        static_cast<int>(round_away(x[i] * inv)), -127, 127));
            }
        }
        std::memcpy(out.data() + b * sizeof(BlockQ8_0), &blk, sizeof(BlockQ8_0));
    }
    return out;
}

void dequantize_q8_0(std::span<const uint8_t> blocks, std::span<float> out) {
    if (blocks.size() % sizeof(BlockQ8_0) != 0)
        throw std::invalid_argument("q8_0: block data length not divisible by 34");
    const size_t n_blocks = blocks.size() / sizeof(BlockQ8_0);
    if (out.size() != n_blocks * 32) throw std::invalid_argument("q8_0: output span has wrong length");
    for (size_t b = 0; b < n_blocks; ++b) {
        BlockQ8_0 blk;
        std::memcpy(&blk, blocks.data() + b * sizeof(BlockQ8_0), sizeof(BlockQ8_0));
        const float d = f16_to_f32(blk.d);
        float* y = out.data() + b * 32;
        for (int i = 0; i < 32; ++i) y[i] = d * blk.qs[i];
    }
}

// ---- Q4_K ----

void put_scale_min_k4(int j, uint8_t ls, uint8_t lm, uint8_t* scales) {
    // call with j ascending over a zeroed 12-byte area
    if (j < 4) {
        scales[j] = ls;
        scales[j + 4] = lm;
    } else {
        scales[j + 4] = static_cast<uint8_t>((ls & 0x0F) | ((lm & 0x0F) << 4));
        scales[j - 4] |= static_cast<uint8_t>((ls >> 4) << 6);
        scales[j] |= static_cast<uint8_t>((lm >> 4) << 6);
    }
}

void get_scale_min_k4(int j, const uint8_t* scales, uint8_t* sc, uint8_t* m) {
    if (j < 4) {
        *sc = scales[j] & 63;
        *m = scales[j + 4] & 63;
    } else {
        *sc = static_cast<uint8_t>((scales[j + 4] & 0x0F) | ((scales[j - 4] >> 6) << 4));
        *m = static_cast<uint8_t>((scales[j + 4] >> 4) | ((scales[j] >> 6) << 4));
    }
}

ScaleMin choose_q4k_scale_min(std::span<const float> sub_block) {
    if (sub_block.empty() || sub_block.size() > 64)
        throw std::invalid_argument("q4_k: sub-block length must be 1..64");
    const float* x = sub_block.data();
    const size_t n = sub_block.size();

    float vmin = x[0], vmax = x[0];
    for (size_t i = 1; i < n; ++i) {
        vmin = std::min(vmin, x[i]);
        vmax = std::max(vmax, x[i]);
    }
    if (vmax == vmin) {
        if (vmax == 0.0f) return {0.0f, 0.0f};
        if (vmax > 0.0f) return {vmax / 15.0f, 0.0f};  // q = 15 everywhere
        return {0.0f, -vmax};                          // q = 0, value = -min
    }

    // reconstruction is s*q - m with m >= 0, so the representable interval is
    // [-m, 15s - m]; anchor it at min(vmin, 0), not at vmin
    const float lo = std::min(vmin, 0.0f);
    float s = (vmax - lo) / 15.0f;
    float m = -lo;

    ScaleMin best{s, m};
    double best_sse = std::numeric_limits<double>::infinity();
    int q[64];

    for (int iter = 0; iter <= 3; ++iter) {
        // evaluate the candidate via its induced rounding
        double sse = 0.0;
        for (size_t i = 0; i < n; ++i) {
            q[i] = clampi(static_cast<int>(round_away((x[i] + m) / s)), 0, 15);
            const double r = static_cast<double>(s) * q[i] - m - x[i];
            sse += r * r;
        }
        if (sse < best_sse) {
            best_sse = sse;
            best = {s, m};
        }
        if (iter == 3) break;

        // least-squares refit of (scale, min) for the current codes
        double sq = 0.0, sqq = 0.0, sx = 0.0, sqx = 0.0;
        for (size_t i = 0; i < n; ++i) {
            sq += q[i];
            sqq += static_cast<double>(q[i]) * q[i];
            sx += x[i];
            sqx += static_cast<double>(q[i]) * x[i];
        }
        const double nn = static_cast<double>(n);
        const double det = nn * sqq - sq * sq;
        if (det <= 0.0) break;  // all codes identical; no scale information
        double s_new = (nn * sqx - sq * sx) / det;
        double m_new = (s_new * sq - sx) / nn;
        if (m_new < 0.0) {  // constrain the offset to be non-negative
            m_new = 0.0;
            s_new = sqq > 0.0 ? sqx / sqq : s_new;
        }
        if (!(s_new > 0.0)) break;
        s = static_cast<float>(s_new);
        m = static_cast<float>(m_new);
    }
    return best;
}

static BlockQ4_K encode_q4k_super(const float* x) {
    float sub_scale[8], sub_min[8];
    float max_scale = 0.0f, max_min = 0.0f;
    for (int j = 0; j < 8; ++j) {
        const ScaleMin sm = choose_q4k_scale_min(std::span<const float>(x + 32 * j, 32));
        sub_scale[j] = sm.scale;
        sub_min[j] = sm.min;
        max_scale = std::max(max_scale, sm.scale);
        max_min = std::max(max_min, sm.min);
    }

    BlockQ4_K blk{};
    const uint16_t d16 = f32_to_f16(max_scale / 63.0f);
    const uint16_t dmin16 = f32_to_f16(max_min / 63.0f);
    const float d = f16_to_f32(d16);
    const float dmin = f16_to_f32(dmin16);
    blk.d = d16;
    blk.dmin = dmin16;

    const float inv_s = max_scale > 0.0f ? 63.0f / max_scale : 0.0f;
    const float inv_m = max_min > 0.0f ? 63.0f / max_min : 0.0f;
    uint8_t ls[8], lm[8];
    for (int j = 0; j < 8; ++j) {
        ls[j] = static_cast<uint8_t>(clampi(static_cast<int>(round_away(sub_scale[j] * inv_s)), 0, 63));
        lm[j] = static_cast<uint8_t>(clampi(static_cast<int>(round_away(sub_min[j] * inv_m)), 0, 63));
        put_scale_min_k4(j, ls[j], lm[j], blk.scales);
    }

    // codes against the decoded effective scales, so encoding loss is absorbed
    uint8_t L[kSuperBlock];
    for (int j = 0; j < 8; ++j) {
        const float d_eff = d * ls[j];
        const float m_eff = dmin * lm[j];
        for (int i = 0; i < 32; ++i) {
            const int idx = 32 * j + i;
            L[idx] = d_eff > 0.0f ? static_cast<uint8_t>(clampi(
                                        static_cast<int>(round_away((x[idx] + m_eff) / d_eff)), 0, 15))
                                  : 0;
        }
    }
    for (int g = 0; g < 4; ++g)
        for (int l = 0; l < 32; ++l)
            blk.qs[g * 32 + l] = static_cast<uint8_t>(L[g * 64 + l] | (L[g * 64 + 32 + l] << 4));
    return blk;
}

static void decode_q4k_super(const BlockQ4_K& blk, float* y);

// The scale/min search is not stable under its own reconstruction: feeding the
// decoded values back in can pick slightly different parameters. Requantizing
// a requantized row must be a no-op, so iterate the encoder on its own
// reconstruction until the decoded values reach a fixed point; on the rare
// closed orbit, settle on the cycle member with the smallest encoding.
static BlockQ4_K encode_q4k_stable(const float* x) {
    struct Iterate {
        std::array<float, kSuperBlock> y;
        BlockQ4_K blk;  // decodes to y
    };
    Iterate cur;
    cur.blk = encode_q4k_super(x);
    decode_q4k_super(cur.blk, cur.y.data());
    std::vector<Iterate> seen;
    for (int iter = 0; iter < 256; ++iter) {
        Iterate next;
        next.blk = encode_q4k_super(cur.y.data());
        decode_q4k_super(next.blk, next.y.data());
        if (std::memcmp(next.y.data(), cur.y.data(), sizeof(cur.y)) == 0) return cur.blk;
        for (size_t s = 0; s < seen.size(); ++s) {
            if (std::memcmp(next.y.data(), seen[s].y.data(), sizeof(cur.y)) != 0) continue;
            // closed orbit: every entry point sees the same value set, so pick
            // the member with the smallest reconstruction bytes
            const Iterate* best = &cur;
            for (size_t t = s; t < seen.size(); ++t)
                if (std::memcmp(seen[t].y.data(), best->y.data(), sizeof(cur.y)) < 0)
                    best = &seen[t];
            return best->blk;
        }
        seen.push_back(cur);
        cur = next;
    }
    return cur.blk;
}

std::vector<uint8_t> quantize_q4_k(std::span<const float> row) {
    check_row(row, kSuperBlock, "q4_k");
    const size_t n_blocks = row.size() / kSuperBlock;
    std::vector<uint8_t> out(n_blocks * sizeof(BlockQ4_K));
    for (size_t b = 0; b < n_blocks; ++b) {
        const BlockQ4_K blk = encode_q4k_stable(row.data() + b * kSuperBlock);
        std::memcpy(out.data() + b * sizeof(BlockQ4_K), &blk, sizeof(BlockQ4_K));
    }
    return out;
}

static void decode_q4k_super(const BlockQ4_K& blk, float* y) {
    const float d = f16_to_f32(blk.d);
    const float dmin = f16_to_f32(blk.dmin);
    const uint8_t* q = blk.qs;
    int is = 0;
    for (int j = 0; j < kSuperBlock; j += 64) {
        uint8_t sc, m;
        get_scale_min_k4(is + 0, blk.scales, &sc, &m);
        const float d1 = d * sc, m1 = dmin * m;
        get_scale_min_k4(is + 1, blk.scales, &sc, &m);
        const float d2 = d * sc, m2 = dmin * m;
        for (int l = 0; l < 32; ++l) *y++ = d1 * (q[l] & 0x0F) - m1;
        for (int l = 0; l < 32; ++l) *y++ = d2 * (q[l] >> 4) - m2;
        q += 32;
        is += 2;
    }
}

void dequantize_q4_k(std::span<const uint8_t> blocks, std::span<float> out) {
    if (blocks.size() % sizeof(BlockQ4_K) != 0)
        throw std::invalid_argument("q4_k: block data length not divisible by 144");
    const size_t n_blocks = blocks.size() / sizeof(BlockQ4_K);
    if (out.size() != n_blocks * kSuperBlock)
        throw std::invalid_argument("q4_k: output span has wrong length");
    for (size_t b = 0; b < n_blocks; ++b) {
        BlockQ4_K blk;
        std::memcpy(&blk, blocks.data() + b * sizeof(BlockQ4_K), sizeof(BlockQ4_K));
        decode_q4k_super(blk, out.data() + b * kSuperBlock);
    }
}

// ---- Q6_K ----

std::vector<uint8_t> quantize_q6_k(std::span<const float> row) {
    check_row(row, kSuperBlock, "q6_k");
    const size_t n_blocks = row.size() / kSuperBlock;
    std::vector<uint8_t> out(n_blocks * sizeof(BlockQ6_K));
    for (size_t b = 0; b < n_blocks; ++b) {
        const float* x = row.data() + b * kSuperBlock;
        float sub_scale[16];
        float max_scale = 0.0f;
        for (int i = 0; i < 16; ++i) {
            float amax = 0.0f;
            for (int k = 0; k < 16; ++k) amax = std::max(amax, std::fabs(x[16 * i + k]));
            sub_scale[i] = amax / 31.0f;
            max_scale = std::max(max_scale, sub_scale[i]);
        }

        BlockQ6_K blk{};
        const uint16_t d16 = f32_to_f16(max_scale / 127.0f);
        const float d = f16_to_f32(d16);
        if (max_scale > 0.0f && d > 0.0f) {
            blk.d = d16;
            const float inv_d = 1.0f / d;
            uint8_t L[kSuperBlock];
            for (int i = 0; i < 16; ++i) {
                int sc = clampi(static_cast<int>(round_away(sub_scale[i] * inv_d)), -128, 127);
                // Re-deriving the sub-scale from the reconstructed values must
                // reproduce the stored one, or requantizing a requantized row
                // would drift. Shrink until stable; the emitted code range is
                // kept symmetric so the loop cannot oscillate upward.
                for (;;) {
                    const float e = d * static_cast<float>(sc);
                    int max_code = 0;
                    for (int k = 0; k < 16; ++k) {
                        const int idx = 16 * i + k;
                        const int q = e != 0.0f
                                          ? clampi(static_cast<int>(round_away(x[idx] / e)), -31, 31)
                                          : 0;
                        L[idx] = static_cast<uint8_t>(q + 32);
                        max_code = std::max(max_code, std::abs(q));
                    }
                    const float rederived = (e * static_cast<float>(max_code)) / 31.0f;
                    const int sc2 = clampi(static_cast<int>(round_away(rederived * inv_d)), -128, 127);
                    if (sc2 == sc) break;
                    sc = sc2;
                }
                blk.scales[i] = static_cast<int8_t>(sc);
            }
            for (int half = 0; half < 2; ++half) {
                const uint8_t* Lh = L + 128 * half;
                uint8_t* ql = blk.ql + 64 * half;
                uint8_t* qh = blk.qh + 32 * half;
                for (int l = 0; l < 32; ++l) {
                    const uint8_t q1 = Lh[l] & 0x0F;
                    const uint8_t q2 = Lh[l + 32] & 0x0F;
                    const uint8_t q3 = Lh[l + 64] & 0x0F;
                    const uint8_t q4 = Lh[l + 96] & 0x0F;
                    ql[l] = static_cast<uint8_t>(q1 | (q3 << 4));
                    ql[l + 32] = static_cast<uint8_t>(q2 | (q4 << 4));
                    qh[l] = static_cast<uint8_t>((Lh[l] >> 4) | ((Lh[l + 32] >> 4) << 2) |
                                                 ((Lh[l + 64] >> 4) << 4) | ((Lh[l + 96] >> 4) << 6));
                }
            }
        }
        std::memcpy(out.data() + b * sizeof(BlockQ6_K), &blk, sizeof(BlockQ6_K));
    }
    return out;
}

void dequantize_q6_k(std::span<const uint8_t> blocks, std::span<float> out) {
    if (blocks.size() % sizeof(BlockQ6_K) != 0)
        throw std::invalid_argument("q6_k: block data length not divisible by 210");
    const size_t n_blocks = blocks.size() / sizeof(BlockQ6_K);
    if (out.size() != n_blocks * kSuperBlock)
        throw std::invalid_argument("q6_k: output span has wrong length");
    for (size_t b = 0; b < n_blocks; ++b) {
        BlockQ6_K blk;
        std::memcpy(&blk, blocks.data() + b * sizeof(BlockQ6_K), sizeof(BlockQ6_K));
        const float d = f16_to_f32(blk.d);
        float* y = out.data() + b * kSuperBlock;
        const uint8_t* ql = blk.ql;
        const uint8_t* qh = blk.qh;
        const int8_t* sc = blk.scales;
        for (int half = 0; half < 2; ++half) {
            for (int l = 0; l < 32; ++l) {
                const int is = l / 16;
                const int q1 = static_cast<int>((ql[l] & 0x0F) | ((qh[l] & 3) << 4)) - 32;
                const int q2 = static_cast<int>((ql[l + 32] & 0x0F) | (((qh[l] >> 2) & 3) << 4)) - 32;
                const int q3 = static_cast<int>((ql[l] >> 4) | (((qh[l] >> 4) & 3) << 4)) - 32;
                const int q4 = static_cast<int>((ql[l + 32] >> 4) | (((qh[l] >> 6) & 3) << 4)) - 32;
                y[l] = d * sc[is + 0] * q1;
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

// ---- scalar conversions ----

std::vector<uint8_t> convert_scalar(std::span<const float> row, QuantType target) {
    std::vector<uint8_t> out;
    switch (target) {
        case QuantType::F32: {
            out.resize(row.size() * 4);
            std::memcpy(out.data(), row.data(), out.size());
            return out;
        }
        case QuantType::F16: {
            out.resize(row.size() * 2);
            for (size_t i = 0; i < row.size(); ++i) {
                const uint16_t h = f32_to_f16(row[i]);
                std::memcpy(out.data() + 2 * i, &h, 2);
            }
            return out;
        }
        case QuantType::BF16: {
            out.resize(row.size() * 2);
            for (size_t i = 0; i < row.size(); ++i) {
                const uint16_t h = f32_to_bf16(row[i]);
                std::memcpy(out.data() + 2 * i, &h, 2);
            }
            return out;
        }
        default:
            throw std::invalid_argument(std::string("convert_scalar: ") + to_string(target) +
                                        " is not a scalar type");
    }
}

std::vector<float> scalar_to_f32(std::span<const uint8_t> data, QuantType source) {
    std::vector<float> out;
    switch (source) {
        case QuantType::F32: {
            if (data.size() % 4 != 0) throw std::invalid_argument("f32 payload not a multiple of 4 bytes");
            out.resize(data.size() / 4);
            std::memcpy(out.data(), data.data(), data.size());
            return out;
        }
        case QuantType::F16:
        case QuantType::BF16: {
            if (data.size() % 2 != 0) throw std::invalid_argument("f16 payload not a multiple of 2 bytes");
            out.resize(data.size() / 2);
            for (size_t i = 0; i < out.size(); ++i) {
                uint16_t h;
                std::memcpy(&h, data.data() + 2 * i, 2);
                out[i] = source == QuantType::F16 ? f16_to_f32(h) : bf16_to_f32(h);
            }
            return out;
        }
        default:
            throw std::invalid_argument(std::string("scalar_to_f32: ") + to_string(source) +
                                        " is not a scalar type");
    }
}

std::vector<uint8_t> quantize_row(std::span<const float> row, QuantType target) {
    switch (target) {
        case QuantType::F32:
        case QuantType::F16:
        case QuantType::BF16:
            return convert_scalar(row, target);
        case QuantType::Q8_0:
            return quantize_q8_0(row);
        case QuantType::Q4_K:
            return quantize_q4_k(row);
        case QuantType::Q6_K:
            return quantize_q6_k(row);
        case QuantType::NF4:
            return quantize_nf4(row);
    }
    throw std::invalid_argument("quantize_row: unknown type");
}

std::vector<float> dequantize_row(std::span<const uint8_t> data, QuantType source) {
    switch (source) {
        case QuantType::F32:
        case QuantType::F16:
        case QuantType::BF16:
            return scalar_to_f32(data, source);
        case QuantType::Q8_0: {
            std::vector<float> out(data.size() / sizeof(BlockQ8_0) * 32);
            dequantize_q8_0(data, out);
            return out;
        }
        case QuantType::Q4_K: {
            std::vector<float> out(data.size() / sizeof(BlockQ4_K) * kSuperBlock);
            dequantize_q4_k(data, out);
            return out;
        }
        case QuantType::Q6_K: {
            std::vector<float> out(data.size() / sizeof(BlockQ6_K) * kSuperBlock);
            dequantize_q6_k(data, out);
            return out;
        }
        case QuantType::NF4:
            return dequantize_nf4(data);
    }
    throw std::invalid_argument("dequantize_row: unknown type");
}

} // namespace quantforge
