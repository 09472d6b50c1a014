#include "qvi/rng.hpp"

#include <cmath>

namespace qvi {

namespace {

constexpr uint32_t kPhiloxW32A = 0x9E3779B9;
constexpr uint32_t kPhiloxW32B = 0xBB67AE85;
constexpr uint32_t kPhiloxM4x32A = 0xD2511F53;
constexpr uint32_t kPhiloxM4x32B = 0xCD9E8D57;

inline uint32_t mulhilo(uint32_t a, uint32_t b, uint32_t* hi) {
  uint64_t p = static_cast<uint64_t>(a) * b;
  *hi = static_cast<uint32_t>(p >> 32);
  return static_cast<uint32_t>(p);
}

inline void round_once(std::array<uint32_t, 4>& ctr, std::array<uint32_t, 2>& key) {
  uint32_t hi0, hi1;
  uint32_t lo0 = mulhilo(kPhiloxM4x32A, ctr[0], &hi0);
  uint32_t lo1 = mulhilo(kPhiloxM4x32B, ctr[2], &hi1);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  key[0] += kPhiloxW32A;
  key[1] += kPhiloxW32B;
}

inline double to_unit_open(uint64_t bits) {
  // 53-bit mantissa shifted into (0,1): never returns an endpoint.
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1p-53;
}

}  // namespace

std::array<uint32_t, 4> Philox4x32::block(const std::array<uint32_t, 4>& counter,
                                          const std::array<uint32_t, 2>& key) {
  std::array<uint32_t, 4> ctr = counter;
  std::array<uint32_t, 2> k = key;
  for (int r = 0; r < 10; ++r) round_once(ctr, k);
  return ctr;
}

RngStream::RngStream(uint64_t seed, Purpose purpose, uint64_t id) {
  key_ = {static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32) ^ purpose};
  id_lo_ = static_cast<uint32_t>(id);
  id_hi_ = static_cast<uint32_t>(id >> 32);
}

std::array<uint32_t, 4> RngStream::next_block() {
  std::array<uint32_t, 4> counter = {static_cast<uint32_t>(draw_),
                                     static_cast<uint32_t>(draw_ >> 32), id_lo_, id_hi_};
  ++draw_;
  return Philox4x32::block(counter, key_);
}

double RngStream::uniform() {
  auto b = next_block();
  uint64_t bits = (static_cast<uint64_t>(b[0]) << 32) | b[1];
  return to_unit_open(bits);
}

double RngStream::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  auto b = next_block();
  double u1 = to_unit_open((static_cast<uint64_t>(b[0]) << 32) | b[1]);
  double u2 = to_unit_open((static_cast<uint64_t>(b[2]) << 32) | b[3]);
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * M_PI * u2;
  cached_normal_ = r * std::sin(a);
  has_cached_normal_ = true;
  return r * std::cos(a);
}

int RngStream::poisson(double mean) {
  if (mean <= 0.0) return 0;
  double u = uniform();
  double p = std::exp(-mean);
  double cdf = p;
  int k = 0;
  // Sequential inversion; mean is O(lambda*dt) << 1 in the intended use.
  while (u > cdf && k < 10000) {
    ++k;
    p *= mean / k;
    cdf += p;
  }
  return k;
}

int RngStream::uniform_index(int n) {
  if (n <= 1) return 0;
  int idx = static_cast<int>(uniform() * n);
  return idx < n ? idx : n - 1;
}

}  // namespace qvi
