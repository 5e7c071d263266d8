#include "mnca/analysis.hpp"
#include "support/gradcheck.hpp"

#include <Eigen/SVD>
#include <doctest.h>

#include <cmath>

using namespace mnca;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
  const RngStream r(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = r.normal(0, static_cast<std::uint64_t>(i), 0);
  return m;
}

ModelShape shape(Variant v, int c, int hidden, int k) {
  ModelShape s;
  s.variant = v;
  s.channels = c;
  s.hidden = hidden;
  s.rules = k;
  return s;
}

Grid<double> noise_grid(int c, int h, int w, std::uint64_t seed) {
  Grid<double> g(c, h, w);
  for (Index i = 0; i < g.data.size(); ++i) g.data.data()[i] = RngStream(seed).normal(0, i, 0);
  return g;
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("power iteration agrees with the SVD") {
  for (int t = 0; t < 30; ++t) {
    const auto m = random_matrix(2 + t % 9, 1 + (t * 5) % 11, 100 + t);
    const double svd = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
    const auto est = spectral_norm(m);
    CHECK(est.converged);
    CHECK(std::abs(est.value - svd) / svd < 1e-6);
    CHECK(std::abs(spectral_norm(m.transpose()).value - svd) / svd < 1e-6);
    for (std::size_t i = 1; i < est.history.size(); ++i) CHECK(est.history[i] >= est.history[i - 1] - 1e-12);
  }
  CHECK_THROWS_AS(spectral_norm(Eigen::MatrixXd(0, 3)), UsageError);
  CHECK(spectral_norm(Eigen::MatrixXd::Zero(3, 3)).value == 0.0);
}

TEST_CASE("rule bound scales with the output layer") {
  auto m = Model<double>::zeros(shape(Variant::Nca, 4, 10, 1));
  testing::randomize(m, RngStream(3), 1.0);
  const double base = lipschitz_report(m).rule_bounds[0];
  const double w1 = spectral_norm(m.rules[0].w1).value, w2 = spectral_norm(m.rules[0].w2).value;
  CHECK(base == doctest::Approx(w1 * w2).epsilon(1e-9));
  for (double a : {0.5, 2.0, 7.0}) {
    auto scaled = m;
    scaled.rules[0].w2 *= a;
    CHECK(lipschitz_report(scaled).rule_bounds[0] == doctest::Approx(a * base).epsilon(1e-9));
  }
  m.rules[0].w2.setZero();
  CHECK(lipschitz_report(m).rule_bounds[0] == 0.0);
  CHECK(lipschitz_report(m).sobel_factor == doctest::Approx(std::sqrt(129.0)));
}

TEST_CASE("mixture bound") {
  auto mix = Model<double>::zeros(shape(Variant::Mnca, 4, 10, 3));
  testing::randomize(mix, RngStream(4), 1.0);
  CHECK_THROWS_AS(lipschitz_report(mix), UsageError);
  const auto g = noise_grid(4, 6, 6, 1);
  const auto rep = lipschitz_report(mix, &g);
  double wsum = 0, expect = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    wsum += rep.weights[k];
    expect += rep.weights[k] * rep.rule_bounds[k];
  }
  CHECK(wsum == doctest::Approx(1.0));
  CHECK(rep.mixture_bound == doctest::Approx(expect));

  auto one = Model<double>::zeros(shape(Variant::Mnca, 4, 10, 1));
  testing::randomize(one, RngStream(5), 1.0);
  const auto r1 = lipschitz_report(one, &g);
  CHECK(r1.mixture_bound == doctest::Approx(r1.rule_bounds[0]));
}

TEST_CASE("rule map") {
  auto mix = Model<double>::zeros(shape(Variant::Mnca, 4, 10, 3));
  testing::randomize(mix, RngStream(6), 1.0);
  const auto g = noise_grid(4, 5, 7, 2);
  const auto map = rule_map(mix, g);
  CHECK(map.probs.rows() == 3);
  CHECK(map.probs.cols() == 35);
  for (Index p = 0; p < 35; ++p) {
    CHECK(map.probs.col(p).sum() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(map.probs(map.argmax[p], p) == map.probs.col(p).maxCoeff());
  }
  const auto steered = rule_map(mix, g, {2.0, 2.0, 2.0});
  CHECK(steered.argmax == map.argmax);
  CHECK((steered.probs - map.probs).cwiseAbs().maxCoeff() < 1e-6);
  CHECK_THROWS_AS(rule_map(Model<double>::zeros(shape(Variant::Nca, 4, 10, 1)), g), UsageError);
}

TEST_CASE("permutation statistic") {
  std::vector<NoiseSample> s;
  for (int i = 0; i < 40; ++i) s.push_back({i < 20 ? -1.0 - 0.01 * i : 1.0 + 0.01 * i, i < 20 ? 0 : 1});
  CHECK(between_class_ss(s, 2) > 39.0);
  CHECK(permutation_p_value(s, 2, 500, RngStream(1)) < 0.01);
  std::vector<NoiseSample> flat;
  for (int i = 0; i < 40; ++i) flat.push_back({RngStream(2).normal(0, i, 0), 0});
  CHECK(between_class_ss(flat, 2) == doctest::Approx(0.0));
  CHECK(permutation_p_value(flat, 2, 200, RngStream(1)) == 1.0);
}

TEST_CASE("noise partition") {
  auto m = Model<double>::zeros(shape(Variant::MncaNoise, 5, 12, 2));
  testing::randomize(m, RngStream(7), 1.0);
  const auto g = noise_grid(5, 6, 6, 3);
  const std::vector<Index> pixels{0, 7, 20};
  const auto a = noise_partition(m, g, pixels, 300, 5, RngStream(9), 200);
  REQUIRE(a.samples.size() == 3);
  CHECK(a.samples[0].size() == 300);
  double f = 0;
  for (double v : a.class_frequency) f += v;
  CHECK(f == doctest::Approx(1.0));
  const auto b = noise_partition(m, g, pixels, 300, 5, RngStream(9), 200);
  CHECK(a.p_value == b.p_value);
  CHECK(a.class_frequency == b.class_frequency);

  // without the noise column, outcomes cannot depend on the draw
  auto severed = m;
  for (auto& r : severed.rules) r.w2.rightCols(r.noise_dim).setZero();
  const auto c = noise_partition(severed, g, {7}, 200, 5, RngStream(9), 200);
  for (const auto& s : c.samples[0]) CHECK(s.outcome == c.samples[0][0].outcome);
  CHECK(c.p_value == 1.0);

  CHECK_THROWS_AS(noise_partition(m, g, {36}, 10, 5, RngStream(1)), UsageError);
  CHECK_THROWS_AS(noise_partition(Model<double>::zeros(shape(Variant::Mnca, 5, 8, 2)), g, {0}, 10, 5, RngStream(1)),
                  UsageError);
}

TEST_CASE("rules sweep") {
  SimParams p = default_params();
  p.size = 9;
  p.steps = 5;
  p.stem_min = 2;
  p.stem_max = 4;
  const auto cohort = run_cohort(p, 3, RngStream(1));
  ModelShape s = shape(Variant::Mnca, 6, 8, 1);
  s.residual = false;
  TrainConfig t;
  t.epochs = 3;
  t.window = 3;
  t.samples = 2;
  const auto rows = rules_sweep(s, t, cohort, {1, 2}, 2, 11);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].rules == 1);
  CHECK(rows[3].rules == 2);
  CHECK(rows[3].repeat == 1);
  for (const auto& r : rows) {
    CHECK(r.error.empty());
    CHECK(r.kl >= 0.0);
  }
  const auto again = rules_sweep(s, t, cohort, {1, 2}, 2, 11);
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].kl == again[i].kl);
  CHECK_THROWS_AS(rules_sweep(s, t, cohort, {}, 1, 1), UsageError);
}

}  // TEST_SUITE
