#include "quantforge/nf4.hpp"

#include "quantforge/safetensors.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

using namespace quantforge;

// Reference 16-value Normal Float table as published with the method's
// reference implementation; the codebook construction must land within a
// few float ulps of it (cross-checked against an inverse-CDF evaluation).
static const float kReferenceTable[16] = {
    -1.0f,
    -0.6961928009986877f,
    -0.5250730514526367f,
    -0.39491748809814453f,
    -0.28444138169288635f,
    -0.18477343022823334f,
    -0.09105003625154495f,
    0.0f,
    0.07958029955625534f,
    0.16093020141124725f,
    0.24611230194568634f,
    0.33791524171829224f,
    0.44070982933044434f,
    0.5626170039176941f,
    0.7229568362236023f,
    1.0f,
};

TEST_CASE("codebook matches the published table") {
    const Nf4Codebook& cb = nf4_codebook();
    CHECK(cb.values[0] == -1.0f);
    CHECK(cb.values[7] == 0.0f);
    CHECK(cb.values[15] == 1.0f);
    for (int i = 0; i < 16; ++i) {
        CAPTURE(i);
        CHECK(std::fabs(cb.values[i] - kReferenceTable[i]) <= 4e-7f);
    }
    for (int i = 1; i < 16; ++i) CHECK(cb.values[i] > cb.values[i - 1]);
}

TEST_CASE("inverse normal CDF sanity") {
    CHECK(inverse_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(inverse_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(inverse_normal_cdf(0.0228) == doctest::Approx(-1.99907721497177).epsilon(1e-9));
    CHECK_THROWS_AS(inverse_normal_cdf(0.0), std::invalid_argument);
    CHECK_THROWS_AS(inverse_normal_cdf(1.0), std::invalid_argument);
}

TEST_CASE("widest codebook gap") {
    // largest adjacent spacing is between -1.0 and the next value
    const float expected = kReferenceTable[1] - kReferenceTable[0];
    CHECK(nf4_widest_gap() == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("nearest code: brute force agreement and tie-to-lower") {
    const Nf4Codebook& cb = nf4_codebook();
    std::mt19937 rng(5150);
    std::uniform_real_distribution<float> dist(-1.2f, 1.2f);
    for (int i = 0; i < 20000; ++i) {
        const float v = dist(rng);
        int best = 0;
        float best_err = std::fabs(cb.values[0] - v);
        for (int c = 1; c < 16; ++c) {
            const float err = std::fabs(cb.values[c] - v);
            if (err < best_err) {
                best_err = err;
                best = c;
            }
        }
        const int got = nf4_nearest_code(v);
        CHECK(std::fabs(cb.values[got] - v) == best_err);
    }
    // exact float ties resolve to the lower index: the midpoint of (0, next)
    // has exactly equal distance to both
    const float mid = cb.values[8] / 2.0f;
    CHECK(cb.values[8] - mid == mid - cb.values[7]);
    CHECK(nf4_nearest_code(mid) == 7);
}

TEST_CASE("block layout: absmax prefix and nibble packing") {
    const Nf4Codebook& cb = nf4_codebook();
    std::vector<float> row(64);
    // element i encodes code (i * 5) % 16, scaled by absmax 2.0; include the
    // +-1 endpoints so absmax is realized
    std::vector<int> want(64);
    for (int i = 0; i < 64; ++i) {
        want[i] = (i * 5) % 16;
        row[static_cast<size_t>(i)] = 2.0f * cb.values[want[i]];
    }
    want[0] = 0;
    row[0] = -2.0f;
    want[1] = 15;
    row[1] = 2.0f;

    const std::vector<uint8_t> blocks = quantize_nf4(row);
    REQUIRE(blocks.size() == 36);

    float absmax = 0;
    std::memcpy(&absmax, blocks.data(), 4);
    CHECK(absmax == 2.0f);

    for (int i = 0; i < 32; ++i) {
        const int even = blocks[static_cast<size_t>(4 + i)] & 0x0F;
        const int odd = blocks[static_cast<size_t>(4 + i)] >> 4;
        CHECK(even == want[2 * i]);
        CHECK(odd == want[2 * i + 1]);
    }

    // exact codebook points dequantize exactly
    const std::vector<float> back = dequantize_nf4(blocks);
    REQUIRE(back.size() == 64);
    for (int i = 0; i < 64; ++i) CHECK(back[static_cast<size_t>(i)] == row[static_cast<size_t>(i)]);
}

TEST_CASE("zero block: absmax 0, all codes 7, dequantizes to zeros") {
    const std::vector<float> zeros(64, 0.0f);
    const std::vector<uint8_t> blocks = quantize_nf4(zeros);
    REQUIRE(blocks.size() == 36);
    for (int i = 0; i < 4; ++i) CHECK(blocks[static_cast<size_t>(i)] == 0);
    for (int i = 4; i < 36; ++i) CHECK(blocks[static_cast<size_t>(i)] == 0x77);
    for (float v : dequantize_nf4(blocks)) CHECK(v == 0.0f);
}

TEST_CASE("endpoints are exact") {
    std::vector<float> row(64, 0.25f);
    row[10] = -2.0f;  // the max-magnitude element
    auto back = dequantize_nf4(quantize_nf4(row));
    CHECK(back[10] == -2.0f);
    row[10] = 2.0f;
    back = dequantize_nf4(quantize_nf4(row));
    CHECK(back[10] == 2.0f);
}

TEST_CASE("per-element round-trip error is bounded by absmax * widest_gap / 2") {
    const float half_gap = nf4_widest_gap() / 2.0f;
    std::mt19937 rng(8888);
    for (int trial = 0; trial < 50; ++trial) {
        const std::vector<float> row = gaussian_values(1000 + trial, 256, 0.02f);
        const std::vector<float> back = dequantize_nf4(quantize_nf4(row));
        for (size_t b = 0; b < 4; ++b) {
            float absmax = 0;
            for (size_t i = b * 64; i < (b + 1) * 64; ++i)
                absmax = std::max(absmax, std::fabs(row[i]));
            for (size_t i = b * 64; i < (b + 1) * 64; ++i) {
                CAPTURE(i);
                CHECK(std::fabs(back[i] - row[i]) <= absmax * half_gap * (1 + 1e-5f));
            }
        }
    }
}

TEST_CASE("multi-block sizing and errors") {
    const std::vector<float> row(256, 0.5f);
    CHECK(quantize_nf4(row).size() == 4 * 36);

    const std::vector<float> ragged(65, 0.5f);
    CHECK_THROWS_AS(quantize_nf4(ragged), std::invalid_argument);

    std::vector<float> bad(64, 0.0f);
    bad[3] = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(quantize_nf4(bad), std::range_error);

    const std::vector<uint8_t> short_blocks(35, 0);
    CHECK_THROWS_AS(dequantize_nf4(short_blocks), std::invalid_argument);
}

TEST_CASE("dequantize agrees with scalar codebook formula for random blocks") {
    const Nf4Codebook& cb = nf4_codebook();
    std::mt19937 rng(424242);
    std::uniform_int_distribution<int> code(0, 15);
    std::uniform_real_distribution<float> amp(0.001f, 3.0f);
    for (int trial = 0; trial < 20; ++trial) {
        const float absmax = amp(rng);
        std::vector<uint8_t> block(36, 0);
        std::memcpy(block.data(), &absmax, 4);
        std::vector<int> codes(64);
        for (int i = 0; i < 32; ++i) {
            codes[2 * i] = code(rng);
            codes[2 * i + 1] = code(rng);
            block[static_cast<size_t>(4 + i)] =
                static_cast<uint8_t>(codes[2 * i] | (codes[2 * i + 1] << 4));
        }
        const std::vector<float> out = dequantize_nf4(block);
        for (int i = 0; i < 64; ++i)
            CHECK(out[static_cast<size_t>(i)] == absmax * cb.values[codes[static_cast<size_t>(i)]]);
    }
}
