#pragma once

#include <array>
#include <cstdint>

namespace qvi {

/// Philox4x32-10 counter-based generator.  Every draw is a pure function of
/// (key, counter), so per-path streams are reproducible regardless of how
/// paths are partitioned across workers or how many paths a run requests.
struct Philox4x32 {
  static std::array<uint32_t, 4> block(const std::array<uint32_t, 4>& counter,
                                       const std::array<uint32_t, 2>& key);
};

/// One logical random stream: (seed, purpose, id) pick the key and the high
/// counter words, a draw index advances through the stream.  Substreams with
/// distinct ids never overlap.
class RngStream {
 public:
  // Purpose tags keep solver-side sampling, path simulation and validation
  // draws on disjoint keys even under a shared user seed.
  enum Purpose : uint32_t {
    kPaths = 0x70617468,       // "path"
    kValidation = 0x76616c64,  // "vald"
    kChecks = 0x63686b73,      // "chks"
  };

  RngStream(uint64_t seed, Purpose purpose, uint64_t id);

  /// Uniform on the open interval (0, 1).
  double uniform();

  /// Standard normal via Box-Muller (pairs cached).
  double normal();

  /// Poisson count by sequential inversion; intended for small means.
  int poisson(double mean);

  /// Integer in [0, n).
  int uniform_index(int n);

  uint64_t draws() const { return draw_; }

 private:
  std::array<uint32_t, 2> key_;
  uint32_t id_lo_, id_hi_;
  uint64_t draw_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;

  std::array<uint32_t, 4> next_block();
};

}  // namespace qvi
