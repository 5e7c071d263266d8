#include "mnca/perturb.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace mnca;

namespace {

Grid<float> ones(int c, int h, int w) {
  Grid<float> g(c, h, w);
  g.data.setOnes();
  return g;
}

int touched(const std::vector<std::uint8_t>& s) { return std::accumulate(s.begin(), s.end(), 0); }

}  // namespace

TEST_SUITE("perturb") {

TEST_CASE("chunk zeroes a clipped box") {
  const auto g = ones(5, 20, 20);
  for (int r = 0; r < 50; ++r) {
    Perturbation p;
    p.side = 5;
    std::vector<std::uint8_t> s;
    const auto out = apply_perturbation(g, p, RngStream(r), &s);
    const int n = touched(s);
    CHECK(n >= 9);  // a corner centre still leaves 3 x 3
    CHECK(n <= 25);
    for (Index i = 0; i < g.pixels(); ++i) {
      if (s[i]) CHECK(out.data.col(i).isZero());
      else CHECK(out.data.col(i) == g.data.col(i));
    }
  }
  Perturbation none;
  none.side = 0;
  CHECK(apply_perturbation(g, none, RngStream(1)).data == g.data);
}

TEST_CASE("sparse removes exactly count pixels") {
  const auto g = ones(4, 12, 12);
  for (int count : {0, 1, 100, 144}) {
    Perturbation p;
    p.kind = PerturbKind::Sparse;
    p.count = count;
    std::vector<std::uint8_t> s;
    const auto out = apply_perturbation(g, p, RngStream(3), &s);
    CHECK(touched(s) == count);
    int zero = 0;
    for (Index i = 0; i < g.pixels(); ++i) zero += out.data.col(i).isZero();
    CHECK(zero == count);
  }
  Perturbation bad;
  bad.kind = PerturbKind::Sparse;
  bad.count = 145;
  CHECK_THROWS_AS(apply_perturbation(g, bad, RngStream(3)), ConfigError);
}

TEST_CASE("noise touches ceil(rho * n) pixels") {
  const auto g = ones(6, 10, 10);
  Perturbation p;
  p.kind = PerturbKind::Noise;
  p.rho = 0.15;
  p.visible_only = true;
  std::vector<std::uint8_t> s;
  const auto out = apply_perturbation(g, p, RngStream(4), &s);
  CHECK(touched(s) == 15);
  for (Index i = 0; i < g.pixels(); ++i) {
    CHECK(out.data.bottomRows(2).col(i) == g.data.bottomRows(2).col(i));
    if (!s[i]) CHECK(out.data.col(i) == g.data.col(i));
  }
  p.sigma = 0.0;
  CHECK(apply_perturbation(g, p, RngStream(4)).data == g.data);
}

TEST_CASE("perturbations are deterministic in the stream") {
  const auto g = ones(4, 16, 16);
  for (auto kind : {PerturbKind::Chunk, PerturbKind::Noise, PerturbKind::Sparse}) {
    Perturbation p;
    p.kind = kind;
    p.count = 30;
    const auto a = apply_perturbation(g, p, RngStream(7));
    const auto b = apply_perturbation(g, p, RngStream(7));
    const auto c = apply_perturbation(g, p, RngStream(8));
    CHECK(a.data == b.data);
    CHECK(a.data != c.data);
    CHECK(parse_perturb_kind(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(parse_perturb_kind("blur"), ConfigError);
  CHECK_THROWS_AS(apply_perturbation(ones(3, 4, 4), Perturbation{}, RngStream(1)), UsageError);
}

TEST_CASE("recovery experiment") {
  ModelShape s;
  s.channels = 5;
  s.hidden = 8;
  const auto m = Model<float>::zeros(s);  // residual, zero update: the state never changes
  const auto g = ones(5, 10, 10);
  Perturbation p;
  p.kind = PerturbKind::Sparse;
  p.count = 10;
  const auto r = recovery_experiment(m, g, g, p, 4, 3, StepOptions{}, RngStream(2));
  REQUIRE(r.curves.size() == 4);
  CHECK(r.completed == 4);
  for (const auto& c : r.curves) {
    REQUIRE(c.size() == 4);
    // 10 of 100 pixels zeroed in the four visible channels
    for (double v : c) CHECK(v == doctest::Approx(0.1));
  }
  CHECK(r.final_mean == doctest::Approx(0.1));
  CHECK(r.final_sd == doctest::Approx(0.0));
  CHECK(r.mean_curve().size() == 4);
  const auto again = recovery_experiment(m, g, g, p, 4, 3, StepOptions{}, RngStream(2));
  CHECK(again.curves == r.curves);
}

}  // TEST_SUITE
