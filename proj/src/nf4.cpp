#include "quantforge/nf4.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace quantforge {

double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("inverse_normal_cdf: p outside (0, 1)");

    // Acklam's rational approximation, then one Halley refinement step.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley refinement against Phi(x) computed via erfc.
    const double sqrt2 = 1.4142135623730951;
    const double sqrt_2pi = 2.5066282746310002;
    const double err = 0.5 * std::erfc(-x / sqrt2) - p;
    const double u = err * sqrt_2pi * std::exp(x * x / 2.0);
    x = x - u / (1.0 + x * u / 2.0);
    return x;
}

static Nf4Codebook build_nf4_codebook() {
    // Quantiles of the standard normal, evenly spaced in probability on each
    // side of an offset chosen so the tails average one sample's mass:
    // 8 values from the upper side, exact zero, 7 from the lower side,
    // normalized so both extreme magnitudes are exactly 1.
    const double offset = 0.9677083;
    double raw[16];
    int n = 0;
    for (int i = 0; i < 8; ++i)  // upper side: linspace(offset, 0.5, 9), drop the 0.5 endpoint
        raw[n++] = inverse_normal_cdf(offset + (0.5 - offset) * i / 8.0);
    raw[n++] = 0.0;
    for (int i = 0; i < 7; ++i)  // lower side, mirrored: linspace(offset, 0.5, 8), drop endpoint
        raw[n++] = -inverse_normal_cdf(offset + (0.5 - offset) * i / 7.0);
    std::sort(raw, raw + 16);
    double absmax = 0.0;
    for (double v : raw) absmax = std::max(absmax, std::fabs(v));
    Nf4Codebook cb;
    for (int i = 0; i < 16; ++i) cb.values[i] = static_cast<float>(raw[i] / absmax);
    cb.values[0] = -1.0f;
    cb.values[15] = 1.0f;
    return cb;
}

const Nf4Codebook& nf4_codebook() {
    static const Nf4Codebook cb = build_nf4_codebook();
    return cb;
}

float nf4_widest_gap() {
    const auto& v = nf4_codebook().values;
    float gap = 0.0f;
    for (int i = 1; i < 16; ++i) gap = std::max(gap, v[i] - v[i - 1]);
    return gap;
}

int nf4_nearest_code(float normalized) {
    const auto& v = nf4_codebook().values;
    int best = 0;
    float best_dist = std::fabs(normalized - v[0]);
    for (int i = 1; i < 16; ++i) {
        const float d = std::fabs(normalized - v[i]);
        if (d < best_dist) {  // strict: ties keep the lower index
            best_dist = d;
            best = i;
        }
    }
    return best;
}

std::vector<uint8_t> quantize_nf4(std::span<const float> row) {
    if (row.size() % kNf4BlockElems != 0)
        throw std::invalid_argument("nf4: row length " + std::to_string(row.size()) +
                                    " not divisible by 64");
    const size_t n_blocks = row.size() / kNf4BlockElems;
    std::vector<uint8_t> out(n_blocks * kNf4BlockBytes);
    for (size_t b = 0; b < n_blocks; ++b) {
        const float* x = row.data() + b * kNf4BlockElems;
        float absmax = 0.0f;
        for (int i = 0; i < kNf4BlockElems; ++i) {
            if (!std::isfinite(x[i])) throw std::range_error("nf4: non-finite input value");
            absmax = std::max(absmax, std::fabs(x[i]));
        }
        uint8_t* blk = out.data() + b * kNf4BlockBytes;
        const uint32_t amax_bits = std::bit_cast<uint32_t>(absmax);
        std::memcpy(blk, &amax_bits, 4);
        uint8_t codes[kNf4BlockElems];
        if (absmax == 0.0f) {
            std::fill(codes, codes + kNf4BlockElems, uint8_t{7});
        } else {
            for (int i = 0; i < kNf4BlockElems; ++i)
                codes[i] = static_cast<uint8_t>(nf4_nearest_code(x[i] / absmax));
        }
        for (int i = 0; i < kNf4BlockElems / 2; ++i)
            blk[4 + i] = static_cast<uint8_t>(codes[2 * i] | (codes[2 * i + 1] << 4));
    }
    return out;
}

void dequantize_nf4(std::span<const uint8_t> blocks, std::span<float> out) {
    if (blocks.size() % kNf4BlockBytes != 0)
        throw std::invalid_argument("nf4: block data length not divisible by 36");
    const size_t n_blocks = blocks.size() / kNf4BlockBytes;
    if (out.size() != n_blocks * kNf4BlockElems)
        throw std::invalid_argument("nf4: output span has wrong length");
    const auto& cb = nf4_codebook().values;
    for (size_t b = 0; b < n_blocks; ++b) {
        const uint8_t* blk = blocks.data() + b * kNf4BlockBytes;
        uint32_t amax_bits;
        std::memcpy(&amax_bits, blk, 4);
        const float absmax = std::bit_cast<float>(amax_bits);
        float* y = out.data() + b * kNf4BlockElems;
        for (int i = 0; i < kNf4BlockElems / 2; ++i) {
            const uint8_t byte = blk[4 + i];
            y[2 * i] = cb[byte & 0x0F] * absmax;
            y[2 * i + 1] = cb[byte >> 4] * absmax;
        }
    }
}

std::vector<float> dequantize_nf4(std::span<const uint8_t> blocks) {
    std::vector<float> out(blocks.size() / kNf4BlockBytes * kNf4BlockElems);
    dequantize_nf4(blocks, std::span<float>(out));
    return out;
}

} // namespace quantforge
