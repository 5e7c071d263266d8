#include "mnca/rng.hpp"
#include "mnca/tensor.hpp"

#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

using namespace mnca;

TEST_SUITE("numerics") {

TEST_CASE("rng draws are pure functions of their coordinates") {
  RngStream a(42), b(42);
  for (std::uint64_t i = 0; i < 100; ++i) {
    CHECK(a.bits(i, i * 3, 7) == b.bits(i, i * 3, 7));
    CHECK(a.uniform(1, i, 0) == b.uniform(1, i, 0));
  }
  // evaluation order does not matter
  std::vector<double> fwd, bwd;
  for (int i = 0; i < 50; ++i) fwd.push_back(a.normal(3, i, 1));
  for (int i = 49; i >= 0; --i) bwd.insert(bwd.begin(), a.normal(3, i, 1));
  CHECK(fwd == bwd);
}

TEST_CASE("forks and seeds give distinct streams") {
  RngStream r(7);
  std::set<std::uint64_t> seen;
  for (std::uint64_t t = 0; t < 200; ++t) seen.insert(r.fork(t).bits(0, 0, 0));
  seen.insert(r.bits(0, 0, 0));
  seen.insert(RngStream(8).bits(0, 0, 0));
  CHECK(seen.size() == 202);
  CHECK(r.fork(1, 2).seed() == r.fork(1).fork(2).seed());
  CHECK(r.fork(1, 2).seed() != r.fork(2, 1).seed());
}

TEST_CASE("uniform stays in the open interval with the right moments") {
  RngStream r(1);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform(0, i, 0);
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sq += u * u;
  }
  const double mean = sum / n;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.005));
  CHECK(sq / n - mean * mean == doctest::Approx(1.0 / 12).epsilon(0.01));
}

TEST_CASE("normal draws have zero mean and unit variance") {
  RngStream r(2);
  double sum = 0, sq = 0, cube = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal(5, i, 3);
    sum += z;
    sq += z * z;
    cube += z * z * z;
  }
  // 5 sigma bounds
  CHECK(std::abs(sum / n) < 5.0 / std::sqrt(n));
  CHECK(std::abs(sq / n - 1.0) < 5.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(cube / n) < 5.0 * std::sqrt(15.0 / n));
}

TEST_CASE("noise normals are independent of gumbel uniforms at the same cell") {
  RngStream r(3);
  const int n = 50000;
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    const double x = std::abs(r.normal(0, i, draw_tag::kNoise));
    const double y = -std::log(r.uniform(0, i, draw_tag::kGumbel));
    sx += x; sy += y; sxx += x * x; syy += y * y; sxy += x * y;
  }
  const double cov = sxy / n - sx / n * sy / n;
  const double corr = cov / std::sqrt((sxx / n - sx * sx / n / n) * (syy / n - sy * sy / n / n));
  CHECK(std::abs(corr) < 5.0 / std::sqrt(n));
}

TEST_CASE("uniform_int covers the closed range") {
  RngStream r(4);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 50000; ++i) ++counts[static_cast<std::size_t>(r.uniform_int(3, 7, 0, i, 0) - 3)];
  for (int c : counts) CHECK(c == doctest::Approx(10000).epsilon(0.05));
  CHECK(r.uniform_int(9, 9, 0, 0, 0) == 9);
}

TEST_CASE("categorical validates its input") {
  RngStream r(5);
  const std::vector<double> neg{0.5, -0.1, 0.6};
  const std::vector<double> bad{0.3, 0.3};
  const std::vector<double> empty;
  CHECK_THROWS_AS(r.categorical(neg, 0, 0, 0), UsageError);
  CHECK_THROWS_AS(r.categorical(bad, 0, 0, 0), UsageError);
  CHECK_THROWS_AS(r.categorical(empty, 0, 0, 0), UsageError);
  const std::vector<double> point{0.0, 1.0, 0.0};
  for (int i = 0; i < 100; ++i) CHECK(r.categorical(point, 0, i, 0) == 1);
}

}  // TEST_SUITE
