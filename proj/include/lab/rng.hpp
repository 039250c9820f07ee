#pragma once
#include <cstdint>
#include <cmath>
#include "lab/types.hpp"

namespace lab {

// Philox4x32-10 counter-based generator. Streams are cheap value types keyed
// by (seed, stream index); any (block, lane) can be generated independently,
// which is what makes worker-count invariance a non-event: path p always reads
// stream p regardless of which thread runs it.
struct Philox {
  static constexpr uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  static constexpr uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;

  static inline void round(uint32_t c[4], uint32_t k0, uint32_t k1) {
    uint64_t p0 = uint64_t(M0) * c[0];
    uint64_t p1 = uint64_t(M1) * c[2];
    uint32_t hi0 = uint32_t(p0 >> 32), lo0 = uint32_t(p0);
    uint32_t hi1 = uint32_t(p1 >> 32), lo1 = uint32_t(p1);
    uint32_t n0 = hi1 ^ c[1] ^ k0;
    uint32_t n1 = lo1;
    uint32_t n2 = hi0 ^ c[3] ^ k1;
    uint32_t n3 = lo0;
    c[0] = n0; c[1] = n1; c[2] = n2; c[3] = n3;
  }

  // 10 rounds, key bumped by the Weyl constants between rounds.
  static inline void block(uint32_t c[4], uint32_t k0, uint32_t k1) {
    for (int r = 0; r < 10; ++r) {
      if (r > 0) { k0 += W0; k1 += W1; }
      round(c, k0, k1);
    }
  }
};

// One logical stream: key = seed, counter = (block, 0, stream_lo, stream_hi).
// Each counter block yields two uniforms, hence one Box-Muller pair.
class RngStream {
 public:
  RngStream(uint64_t seed, uint64_t stream)
      : k0_(uint32_t(seed)), k1_(uint32_t(seed >> 32)),
        s0_(uint32_t(stream)), s1_(uint32_t(stream >> 32)) {}

  // Two independent N(0,1) draws from counter block `b`.
  void normal_pair_at(uint64_t b, double& z0, double& z1) const {
    uint32_t c[4] = {uint32_t(b), uint32_t(b >> 32), s0_, s1_};
    Philox::block(c, k0_, k1_);
    double u1 = to_unit(c[0], c[1]);
    double u2 = to_unit(c[2], c[3]);
    double r = std::sqrt(-2.0 * std::log(u1));
    z0 = r * std::cos(2.0 * M_PI * u2);
    z1 = r * std::sin(2.0 * M_PI * u2);
  }

  double normal() {
    if (have_) { have_ = false; return spare_; }
    double z0, z1;
    normal_pair_at(next_++, z0, z1);
    spare_ = z1; have_ = true;
    return z0;
  }

  // The single site where the generator convention enters: driving increments
  // for the Delta-generator diffusion have variance 2*dt per coordinate.
  template <class S>
  void fill_increment(VecT<S>& dB, int m, S dt) {
    S sd = std::sqrt(S(2) * dt);
    dB.resize(m);
    for (int i = 0; i < m; ++i) dB[i] = S(sd * normal());
  }

  uint64_t raw64() {
    uint32_t c[4] = {uint32_t(next_), uint32_t(next_ >> 32), s0_, s1_};
    ++next_;
    have_ = false;
    Philox::block(c, k0_, k1_);
    return (uint64_t(c[0]) << 32) | c[1];
  }

  double uniform() {  // in (0,1]
    return double((raw64() >> 11) + 1) * 0x1p-53;
  }

  void reset() { next_ = 0; have_ = false; }

 private:
  static double to_unit(uint32_t a, uint32_t b) {
    uint64_t x = (uint64_t(a) << 32) | b;
    return double((x >> 11) + 1) * 0x1p-53;  // (0,1], safe under log
  }
  uint32_t k0_, k1_, s0_, s1_;
  uint64_t next_ = 0;
  double spare_ = 0;
  bool have_ = false;
};

inline RngStream rng_stream(uint64_t seed, uint64_t index) {
  return RngStream(seed, index);
}

}  // namespace lab
