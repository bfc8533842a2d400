#include "gsnpmle/rng.hpp"

#include <cmath>
#include <numbers>

#include "gsnpmle/errors.hpp"
#include "gsnpmle/special_functions.hpp"

namespace gsnpmle {
namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85;

void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw DomainError(std::string("sampler: non-finite ") + what);
}

}  // namespace

void Rng::refill() {
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
      static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                            static_cast<std::uint32_t>(seed_ >> 32)};
  buffer_ = philox4x32_10(ctr, key);
  ++block_;
  used_ = 0;
}

std::uint32_t Rng::next_u32() {
  if (used_ == 4) refill();
  return buffer_[used_++];
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t hi = next_u32();
  return (hi << 32) | next_u32();
}

double Rng::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  const double r = std::sqrt(-2.0 * std::log(uniform()));
  const double phi = 2.0 * std::numbers::pi * uniform();
  spare_normal_ = r * std::sin(phi);
  has_spare_normal_ = true;
  return r * std::cos(phi);
}

double sample_gamma(double shape, double rate, Rng& rng) {
  require_finite(shape, "gamma shape");
  require_finite(rate, "gamma rate");
  if (!(shape > 0.0) || !(rate > 0.0)) throw DomainError("sample_gamma: shape and rate must be positive");

  if (shape < 1.0) {
    const double boosted = sample_gamma(shape + 1.0, 1.0, rng);
    return boosted * std::pow(rng.uniform(), 1.0 / shape) / rate;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
  }
}

std::int64_t sample_poisson(double mean, Rng& rng) {
  require_finite(mean, "poisson mean");
  if (mean < 0.0) throw DomainError("sample_poisson: mean must be nonnegative");
  if (mean == 0.0) return 0;

  if (mean < 10.0) {
    // Sequential search on the cdf.
    const double u = rng.uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::int64_t k = 0;
    while (u > cdf) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
      if (p == 0.0) break;
    }
    return k;
  }

  // PTRS: transformed rejection with squeeze.
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::int64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        -mean + k * loglam - log_factorial(k)) {
      return static_cast<std::int64_t>(k);
    }
  }
}

double sample_lognormal(double mu, double sigma, Rng& rng) {
  require_finite(mu, "lognormal mu");
  require_finite(sigma, "lognormal sigma");
  if (!(sigma > 0.0)) throw DomainError("sample_lognormal: sigma must be positive");
  return std::exp(mu + sigma * rng.normal());
}

double sample_inverse_gaussian(double mu, double lam, Rng& rng) {
  require_finite(mu, "inverse gaussian mu");
  require_finite(lam, "inverse gaussian lambda");
  if (!(mu > 0.0) || !(lam > 0.0)) throw DomainError("sample_inverse_gaussian: parameters must be positive");
  const double z = rng.normal();
  const double y = z * z;
  // Smaller root of the MSH quadratic, written via the product of roots
  // (= mu^2) to avoid cancellation when mu * y is large.
  const double x = mu * 2.0 * lam / (2.0 * lam + mu * y + std::sqrt(4.0 * mu * lam * y + mu * mu * y * y));
  if (rng.uniform() <= mu / (mu + x)) return x;
  return mu * mu / x;
}

}  // namespace gsnpmle
