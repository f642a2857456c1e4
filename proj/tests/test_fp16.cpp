#include "quantforge/fp16.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <random>

using namespace quantforge;

// Conversion goldens below were produced with numpy's float16 casts and
// frozen here; saturation cases (where IEEE would give infinity) are split
// out because this converter clamps finite inputs to +-65504 by design.

TEST_CASE("f32_to_f16 matches reference conversions") {
    struct Case {
        float in;
        uint16_t bits;
    };
    const Case cases[] = {
        {0.0f, 0x0000},          {-0.0f, 0x8000},
        {1.0f, 0x3C00},          {-1.0f, 0xBC00},
        {0.5f, 0x3800},          {65504.0f, 0x7BFF},
        {6.0975552e-05f, 0x03FF},   // largest subnormal
        {6.1e-05f, 0x03FF},         // rounds down into subnormal range
        {2.2e-05f, 0x0171},         // mid subnormal
        {5.96e-08f, 0x0001},        // smallest subnormal
        {8.9e-08f, 0x0001},         // rounds to smallest subnormal
        {2.9e-08f, 0x0000},         // below half of smallest subnormal
        {0.1f, 0x2E66},          {3.14159265f, 0x4248},
        {-0.0027999878f, 0x99BC},
        {1.0009765625f, 0x3C01},
        {2048.0f, 0x6800},
        {2049.0f, 0x6800},          // tie rounds to even
        {2050.0f, 0x6801},
    };
    for (const Case& c : cases) {
        CAPTURE(c.in);
        CHECK(f32_to_f16(c.in) == c.bits);
    }
}

TEST_CASE("f32_to_f16 saturates finite overflow instead of producing inf") {
    CHECK(f32_to_f16(65520.0f) == 0x7BFF);
    CHECK(f32_to_f16(1e6f) == 0x7BFF);
    CHECK(f32_to_f16(-1e6f) == 0xFBFF);
    CHECK(f32_to_f16(3.4e38f) == 0x7BFF);
    // NaN stays NaN
    const uint16_t nan16 = f32_to_f16(std::nanf(""));
    CHECK(((nan16 & 0x7C00) == 0x7C00));
    CHECK((nan16 & 0x03FF) != 0);
}

TEST_CASE("f16_to_f32 matches reference expansions") {
    struct Case {
        uint16_t bits;
        float out;
    };
    const Case cases[] = {
        {0x0000, 0.0f},
        {0x3C00, 1.0f},
        {0xBC00, -1.0f},
        {0x0001, 5.9604644775390625e-08f},
        {0x03FF, 6.0975551605224609e-05f},
        {0x0400, 6.103515625e-05f},
        {0x7BFF, 65504.0f},
        {0x3555, 0.333251953125f},
    };
    for (const Case& c : cases) {
        CAPTURE(c.bits);
        CHECK(f16_to_f32(c.bits) == c.out);
    }
    CHECK(std::signbit(f16_to_f32(0x8000)));
    CHECK(f16_to_f32(0x8000) == 0.0f);
    CHECK(std::isinf(f16_to_f32(0x7C00)));
    CHECK(f16_to_f32(0xFC00) < 0);
    CHECK(std::isinf(f16_to_f32(0xFC00)));
}

TEST_CASE("f16 round-trip is exact for every representable finite half") {
    for (uint32_t h = 0; h <= 0xFFFF; ++h) {
        const uint16_t bits = static_cast<uint16_t>(h);
        if ((bits & 0x7C00) == 0x7C00) continue;  // inf/NaN
        CAPTURE(bits);
        REQUIRE(f32_to_f16(f16_to_f32(bits)) == bits);
    }
}

TEST_CASE("f32_to_f16 picks the nearest representable half") {
    std::mt19937 rng(1234);
    std::uniform_real_distribution<float> dist(-70000.0f, 70000.0f);
    for (int i = 0; i < 20000; ++i) {
        const float v = dist(rng);
        const uint16_t h = f32_to_f16(v);
        const float back = f16_to_f32(h);
        // nearest-or-saturated: no other half is strictly closer
        const float err = std::fabs(back - static_cast<double>(v));
        const uint16_t up = static_cast<uint16_t>(h + 1);
        const uint16_t down = static_cast<uint16_t>(h - 1);
        if ((up & 0x7C00) != 0x7C00 && (up & 0x8000) == (h & 0x8000))
            CHECK(std::fabs(f16_to_f32(up) - static_cast<double>(v)) >= err);
        if ((down & 0x7C00) != 0x7C00 && (down & 0x8000) == (h & 0x8000) && (h & 0x7FFF) != 0)
            CHECK(std::fabs(f16_to_f32(down) - static_cast<double>(v)) >= err);
    }
}

TEST_CASE("bf16 conversions") {
    CHECK(f32_to_bf16(1.0f) == 0x3F80);
    CHECK(bf16_to_f32(0x3F80) == 1.0f);
    CHECK(f32_to_bf16(-1.0f) == 0xBF80);
    CHECK(f32_to_bf16(0.0f) == 0x0000);

    // ties to even: 1 + 2^-8 sits exactly between 0x3F80 and 0x3F81
    CHECK(f32_to_bf16(std::bit_cast<float>(0x3F808000u)) == 0x3F80);
    CHECK(f32_to_bf16(std::bit_cast<float>(0x3F818000u)) == 0x3F82);
    CHECK(f32_to_bf16(std::bit_cast<float>(0x3F807FFFu)) == 0x3F80);
    CHECK(f32_to_bf16(std::bit_cast<float>(0x3F808001u)) == 0x3F81);

    // bf16 -> f32 is exact (upper 16 bits)
    std::mt19937 rng(99);
    for (int i = 0; i < 1000; ++i) {
        const uint16_t b = static_cast<uint16_t>(rng());
        if ((b & 0x7F80) == 0x7F80) continue;  // inf/NaN
        CHECK(f32_to_bf16(bf16_to_f32(b)) == b);
    }

    const uint16_t nan = f32_to_bf16(std::nanf(""));
    CHECK((nan & 0x7F80) == 0x7F80);
    CHECK((nan & 0x007F) != 0);
}
