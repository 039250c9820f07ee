#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <cmath>
#include <vector>
#include "lab/rng.hpp"

using namespace lab;

// Known-answer vectors for Philox4x32-10 (Salmon et al. reference tests).
TEST_CASE("philox known answers") {
  {
    uint32_t c[4] = {0, 0, 0, 0};
    Philox::block(c, 0, 0);
    CHECK(c[0] == 0x6627e8d5u);
    CHECK(c[1] == 0xe169c58du);
    CHECK(c[2] == 0xbc57ac4cu);
    CHECK(c[3] == 0x9b00dbd8u);
  }
  {
    uint32_t c[4] = {0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu};
    Philox::block(c, 0xffffffffu, 0xffffffffu);
    CHECK(c[0] == 0x408f276du);
    CHECK(c[1] == 0x41c83b0eu);
    CHECK(c[2] == 0xa20bc7c6u);
    CHECK(c[3] == 0x6d5451fdu);
  }
  {
    uint32_t c[4] = {0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u};
    Philox::block(c, 0xa4093822u, 0x299f31d0u);
    CHECK(c[0] == 0xd16cfe09u);
    CHECK(c[1] == 0x94fdccebu);
    CHECK(c[2] == 0x5001e420u);
    CHECK(c[3] == 0x24126ea1u);
  }
}

TEST_CASE("same seed and index reproduce the stream") {
  auto a = rng_stream(1234, 77);
  auto b = rng_stream(1234, 77);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
}

TEST_CASE("stream draws are addressable by counter block") {
  auto s = rng_stream(9, 3);
  double z0, z1, w0, w1;
  s.normal_pair_at(42, z0, z1);
  s.normal_pair_at(42, w0, w1);
  CHECK(z0 == w0);
  CHECK(z1 == w1);
  s.normal_pair_at(43, w0, w1);
  CHECK(z0 != w0);
}

TEST_CASE("adjacent streams are uncorrelated") {
  const int n = 1000000;
  double sxy = 0, sx = 0, sy = 0, sxx = 0, syy = 0;
  auto a = rng_stream(555, 10);
  auto b = rng_stream(555, 11);
  for (int i = 0; i < n; ++i) {
    double x = a.normal(), y = b.normal();
    sx += x; sy += y; sxy += x * y; sxx += x * x; syy += y * y;
  }
  double cx = sx / n, cy = sy / n;
  double corr = (sxy / n - cx * cy) /
                std::sqrt((sxx / n - cx * cx) * (syy / n - cy * cy));
  CHECK(std::abs(corr) < 3.0 / std::sqrt(double(n)));
}

TEST_CASE("changing the seed changes every stream") {
  int changed = 0;
  for (uint64_t idx = 0; idx < 64; ++idx) {
    auto a = rng_stream(100, idx);
    auto b = rng_stream(101, idx);
    if (a.normal() != b.normal()) ++changed;
  }
  CHECK(changed == 64);
}

TEST_CASE("increments carry variance 2 dt") {
  const double dt = 0.01;
  const int n = 200000;
  auto s = rng_stream(7, 0);
  Vec dB;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    s.fill_increment(dB, 2, dt);
    for (int k = 0; k < 2; ++k) { sum += dB[k]; sum2 += dB[k] * dB[k]; }
  }
  double mean = sum / (2 * n);
  double var = sum2 / (2 * n) - mean * mean;
  CHECK(std::abs(mean) < 4 * std::sqrt(2 * dt / (2.0 * n)));
  CHECK(var == doctest::Approx(2 * dt).epsilon(0.01));
}
