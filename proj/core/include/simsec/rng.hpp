#pragma once

#include <array>
#include <cstdint>
#include <limits>

#include "simsec/linalg.hpp"

namespace simsec {

/// Identifies an independent random stream under one master seed.
struct StreamId {
  std::uint64_t experiment = 0;
  std::uint64_t trial = 0;
  std::uint64_t purpose = 0;

  friend bool operator==(const StreamId&, const StreamId&) = default;
};

/// Counter-based generator (Philox4x32-10). The sequence is a pure function of
/// (seed, stream, draw index), so it is reproducible across platforms and any
/// stream can be created independently of every other.
///
/// Distributions are implemented here rather than through <random> because the
/// standard library distributions are not specified bit-exactly.
class SeededRng {
 public:
  using result_type = std::uint64_t;

  SeededRng(std::uint64_t seed, StreamId stream);

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();
  /// Circularly-symmetric complex Gaussian with unit total variance.
  linalg::Complex complex_normal();
  /// ±1 with equal probability.
  double rademacher();

  /// Child stream keyed by `purpose`, independent of this stream's position.
  [[nodiscard]] SeededRng derive(std::uint64_t purpose) const;

  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] const StreamId& stream() const noexcept { return stream_; }

 private:
  void refill();

  std::uint64_t seed_;
  StreamId stream_;
  std::uint64_t stream_key_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// n i.i.d. CN(0, 1) samples.
[[nodiscard]] linalg::CVector sample_cn(SeededRng& rng, std::size_t n);

}  // namespace simsec
