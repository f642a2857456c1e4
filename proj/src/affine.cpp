#include "quantforge/affine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace quantforge {

float round_away(float v) {
    return std::roundf(v);  // std::roundf rounds halfway cases away from zero
}

void AffineParams::validate() const {
    if (bit_width != 4 && bit_width != 8)
        throw std::invalid_argument("affine: bit width must be 4 or 8");
    if (!(scale > 0.0f) || !std::isfinite(scale))
        throw std::invalid_argument("affine: scale must be positive and finite");
    if (zero_point < q_min() || zero_point > q_max())
        throw std::invalid_argument("affine: zero point " + std::to_string(zero_point) +
                                    " outside [" + std::to_string(q_min()) + ", " +
                                    std::to_string(q_max()) + "]");
}

AffineParams compute_affine_params(std::span<const float> values, int bit_width, bool signed_range,
                                   bool symmetric) {
    if (values.empty()) throw std::invalid_argument("affine: empty input");
    if (bit_width != 4 && bit_width != 8)
        throw std::invalid_argument("affine: bit width must be 4 or 8");

    float lo = values[0], hi = values[0];
    for (float v : values) {
        if (!std::isfinite(v)) throw std::range_error("affine: non-finite input value");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }

    AffineParams p;
    p.bit_width = bit_width;
    p.signed_range = signed_range;
    const float q_min = static_cast<float>(p.q_min());
    const float q_max = static_cast<float>(p.q_max());

    if (lo == hi) {
        // degenerate in either mode: encode the constant via the zero point
        // at scale 1 so it reconstructs exactly (when it fits the code range)
        p.scale = 1.0f;
        p.zero_point = std::clamp(static_cast<int32_t>(round_away(-lo)), p.q_min(), p.q_max());
        return p;
    }

    if (symmetric) {
        const float absmax = std::max(std::fabs(lo), std::fabs(hi));
        p.scale = absmax / q_max;
        p.zero_point = 0;
        return p;
    }

    p.scale = (hi - lo) / (q_max - q_min);
    const float z = round_away(q_min - lo / p.scale);
    p.zero_point = std::clamp(static_cast<int32_t>(z), p.q_min(), p.q_max());
    return p;
}

int32_t quantize_affine(float r, const AffineParams& params) {
    params.validate();
    if (!std::isfinite(r)) throw std::range_error("affine: non-finite input value");
    const float q = round_away(r / params.scale) + static_cast<float>(params.zero_point);
    const float clamped = std::clamp(q, static_cast<float>(params.q_min()),
                                     static_cast<float>(params.q_max()));
    return static_cast<int32_t>(clamped);
}

float dequantize_affine(int32_t q, const AffineParams& params) {
    params.validate();
    if (q < params.q_min() || q > params.q_max())
        throw std::invalid_argument("affine: code " + std::to_string(q) + " outside [" +
                                    std::to_string(params.q_min()) + ", " +
                                    std::to_string(params.q_max()) + "]");
    return static_cast<float>(q - params.zero_point) * params.scale;
}

} // namespace quantforge
