#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "gsnpmle/errors.hpp"
#include "gsnpmle/rng.hpp"

using namespace gsnpmle;

namespace {

struct Moments {
  double mean = 0, var = 0;
};

template <class F>
Moments moments(F draw, int n) {
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double v = draw();
    s += v;
    s2 += v * v;
  }
  Moments m;
  m.mean = s / n;
  m.var = s2 / n - m.mean * m.mean;
  return m;
}

// Checks first two moments within 4 standard errors. fourth is the analytic
// fourth central moment, used for the variance standard error.
void check_moments(const Moments& m, double mean, double var, double fourth, int n) {
  CHECK(std::abs(m.mean - mean) < 4 * std::sqrt(var / n));
  CHECK(std::abs(m.var - var) < 4 * std::sqrt((fourth - var * var) / n));
}

}  // namespace

TEST_CASE("Rng determinism and stream separation") {
  Rng a(42, 7), b(42, 7), c(42, 8);
  bool differ = false;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differ |= x != c.next_u64();
  }
  CHECK(differ);
  CHECK(stream_for(5, StreamPurpose::kData) != stream_for(5, StreamPurpose::kThreshold));
  Rng u(1, 0);
  for (int i = 0; i < 10000; ++i) {
    const double v = u.uniform();
    CHECK((v > 0.0 && v < 1.0));
  }
}

TEST_CASE("Philox4x32-10 known answer") {
  // Random123 known-answer vector: counter = key = 0.
  Rng r(0, 0);
  CHECK(r.next_u32() == 0x6627e8d5u);
  CHECK(r.next_u32() == 0xe169c58du);
  CHECK(r.next_u32() == 0xbc57ac4cu);
  CHECK(r.next_u32() == 0x9b00dbd8u);
}

TEST_CASE("sampler means from the examples") {
  Rng r(2024, 1);
  const int n = 100000;
  CHECK(std::abs(moments([&] { return sample_gamma(2, 2, r); }, n).mean - 1.0) < 0.02);
  CHECK(std::abs(moments([&] { return double(sample_poisson(3, r)); }, n).mean - 3.0) < 0.05);
  CHECK(std::abs(moments([&] { return sample_inverse_gaussian(1, 1, r); }, n).mean - 1.0) < 0.04);
}

TEST_CASE("sampler moments within 4 SE") {
  const int n = 100000;
  SUBCASE("gamma") {
    for (double shape : {0.1, 0.7, 1.0, 2.0, 9.5}) {
      Rng r(11, static_cast<std::uint64_t>(shape * 10));
      const double rate = 1.7;
      const auto m = moments([&] { return sample_gamma(shape, rate, r); }, n);
      const double var = shape / (rate * rate);
      check_moments(m, shape / rate, var, 3 * shape * (shape + 2) / std::pow(rate, 4), n);
    }
  }
  SUBCASE("poisson") {
    for (double mu : {0.0, 0.3, 3.0, 9.99, 10.0, 47.0, 1e4}) {
      Rng r(12, static_cast<std::uint64_t>(mu * 100));
      const auto m = moments([&] { return double(sample_poisson(mu, r)); }, n);
      if (mu == 0.0) {
        CHECK(m.mean == 0.0);
        continue;
      }
      check_moments(m, mu, mu, mu * (1 + 3 * mu), n);
    }
  }
  SUBCASE("lognormal") {
    Rng r(13, 0);
    const double s2 = 0.25;
    const auto m = moments([&] { return sample_lognormal(0.3, 0.5, r); }, n);
    const double mean = std::exp(0.3 + s2 / 2);
    const double var = (std::exp(s2) - 1) * std::exp(0.6 + s2);
    // fourth central moment of the lognormal
    const double w = std::exp(s2);
    const double fourth = var * var * (w * w * w * w + 2 * w * w * w + 3 * w * w - 3);
    check_moments(m, mean, var, fourth, n);
  }
  SUBCASE("inverse gaussian") {
    for (auto [mu, lam] : std::vector<std::pair<double, double>>{{1, 1}, {3, 9}, {0.5, 20}}) {
      Rng r(14, static_cast<std::uint64_t>(mu * 10 + lam));
      const auto m = moments([&] { return sample_inverse_gaussian(mu, lam, r); }, n);
      const double var = mu * mu * mu / lam;
      const double fourth = 15 * std::pow(mu, 7) / (lam * lam * lam) + 3 * var * var;
      check_moments(m, mu, var, fourth, n);
    }
  }
}

TEST_CASE("samplers reject bad parameters") {
  Rng r(1, 1);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(sample_gamma(nan, 1, r), DomainError);
  CHECK_THROWS_AS(sample_gamma(1, 0, r), DomainError);
  CHECK_THROWS_AS(sample_poisson(-1, r), DomainError);
  CHECK_THROWS_AS(sample_poisson(std::numeric_limits<double>::infinity(), r), DomainError);
  CHECK_THROWS_AS(sample_lognormal(0, -1, r), DomainError);
  CHECK_THROWS_AS(sample_inverse_gaussian(1, nan, r), DomainError);
}
