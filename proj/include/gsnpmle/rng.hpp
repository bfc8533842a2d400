#pragma once

#include <array>
#include <cstdint>

namespace gsnpmle {

/// Counter-based generator (Philox4x32-10, Salmon et al. 2011).
///
/// The 64-bit seed is the Philox key. The 128-bit counter is split into the
/// 64-bit stream id (high half) and a 64-bit block index (low half), so two
/// generators with different stream ids walk disjoint counter ranges and can
/// never produce overlapping output. Each block yields four 32-bit words.
///
/// Stream ids are conventionally `replication index | purpose tag << 48`; see
/// `stream_for`.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_(stream_id) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform double on the open interval (0, 1), 53-bit resolution.
  double uniform();

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// Purpose tags for deriving independent streams from one replication index.
enum class StreamPurpose : std::uint64_t {
  kData = 0,
  kThreshold = 1,
  kFolds = 2,
  kAuxiliary = 3,
};

constexpr std::uint64_t stream_for(std::uint64_t replication, StreamPurpose purpose) {
  return (static_cast<std::uint64_t>(purpose) << 48) | (replication & ((std::uint64_t{1} << 48) - 1));
}

/// Gamma(shape, rate) in the shape-rate parametrization (mean shape/rate).
/// Marsaglia-Tsang squeeze; shape < 1 boosted with U^{1/shape}.
double sample_gamma(double shape, double rate, Rng& rng);

/// Poisson(mean): inversion below 10, Hormann's PTRS rejection above.
std::int64_t sample_poisson(double mean, Rng& rng);

/// exp(N(mu, sigma^2)).
double sample_lognormal(double mu, double sigma, Rng& rng);

/// Inverse Gaussian with mean mu and shape lam (Michael-Schucany-Haas).
double sample_inverse_gaussian(double mu, double lam, Rng& rng);

}  // namespace gsnpmle
