#include "mnca/optim.hpp"
#include "mnca/parallel.hpp"
#include "mnca/training.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace mnca;

namespace {

Model<double> scalar_model() {
  // Smallest model; the tests below drive one entry of b2 by hand.
  ModelShape s;
  s.channels = 1;
  s.hidden = 1;
  return Model<double>::zeros(s);
}

std::vector<Sequence<float>> decay_sequences(int n, int length, std::uint64_t seed) {
  std::vector<Sequence<float>> out;
  RngStream r(seed);
  for (int i = 0; i < n; ++i) {
    Grid<float> g(2, 6, 6);
    for (Index j = 0; j < g.data.size(); ++j) g.data.data()[j] = static_cast<float>(r.normal(i, j, 0));
    Sequence<float> seq{g};
    for (int t = 1; t < length; ++t) {
      Grid<float> next = seq.back();
      next.data *= 0.5f;
      seq.push_back(next);
    }
    out.push_back(seq);
  }
  return out;
}

TrainConfig small_config() {
  TrainConfig c;
  c.learning_rate = 1e-2;
  c.epochs = 200;
  c.milestones = {150};
  c.window = 2;
  c.samples = 4;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("adam: zero gradient is a fixed point") {
  Model<double> p = scalar_model();
  p.rules[0].b2(0, 0) = 0.7;
  auto state = AdamState<double>::for_model(p);
  adam_update(p, p.zeros_like(), state, 1e-3);
  CHECK(p.rules[0].b2(0, 0) == 0.7);
  CHECK(state.m.rules[0].b2(0, 0) == 0.0);
  CHECK(state.v.rules[0].b2(0, 0) == 0.0);
  CHECK(state.step == 1);
}

TEST_CASE("adam: scalar trace against a hand-written reference") {
  Model<double> p = scalar_model();
  auto state = AdamState<double>::for_model(p);
  Model<double> g = p.zeros_like();

  g.rules[0].b2(0, 0) = 1.0;
  adam_update(p, g, state, 1e-3);
  // m = 0.1, v = 0.001; bias corrected both are 1.
  const double first = -1e-3 * 1.0 / (1.0 + 1e-8);
  CHECK(p.rules[0].b2(0, 0) == doctest::Approx(first).epsilon(1e-12));
  CHECK(first == doctest::Approx(-9.99989e-4).epsilon(1e-4));

  g.rules[0].b2(0, 0) = -2.0;
  adam_update(p, g, state, 1e-3);
  const double m2 = 0.9 * 0.1 + 0.1 * -2.0;
  const double v2 = 0.999 * 0.001 + 0.001 * 4.0;
  const double mh = m2 / (1 - 0.81);
  const double vh = v2 / (1 - 0.999 * 0.999);
  CHECK(p.rules[0].b2(0, 0) == doctest::Approx(first - 1e-3 * mh / (std::sqrt(vh) + 1e-8)).epsilon(1e-12));
  CHECK(state.step == 2);
}

TEST_CASE("learning-rate schedule") {
  const std::vector<int> ms{4000, 6000, 7000};
  CHECK(lr_at(1e-3, ms, 0.1, 0) == doctest::Approx(1e-3));
  CHECK(lr_at(1e-3, ms, 0.1, 3999) == doctest::Approx(1e-3));
  CHECK(lr_at(1e-3, ms, 0.1, 4000) == doctest::Approx(1e-4));
  CHECK(lr_at(1e-3, ms, 0.1, 6000) == doctest::Approx(1e-5));
  CHECK(lr_at(1e-3, ms, 0.1, 7000) == doctest::Approx(1e-6));
  CHECK(lr_at(1e-3, {}, 0.1, 9999) == 1e-3);
  CHECK(lr_at(1e-3, ms, 1.0, 9999) == 1e-3);
  double prev = 1.0;
  for (int e = 0; e < 8000; e += 250) {
    const double lr = lr_at(1e-3, {500, 5000}, 0.2, e);
    CHECK(lr <= prev);
    prev = lr;
  }
}

TEST_CASE("gradient normalization per tensor") {
  ModelShape s;
  s.channels = 3;
  s.hidden = 5;
  Model<double> g = Model<double>::zeros(s);
  RngStream r(1);
  for (Index i = 0; i < g.rules[0].w1.size(); ++i) g.rules[0].w1.data()[i] = 10 * r.normal(0, i, 0);
  g.rules[0].b1.setConstant(1e-12);
  const double n = g.rules[0].w1.norm();
  const Model<double> before = g;
  normalize_grads(g, 1e-8);
  CHECK(g.rules[0].w1.norm() == doctest::Approx(n / (n + 1e-8)).epsilon(1e-12));
  CHECK(g.rules[0].w2.isZero());
  g.visit([](const std::string&, const Mat<double>& m) { CHECK(m.norm() <= 1.0); });
  CHECK((g.rules[0].w1 - before.rules[0].w1 / (n + 1e-8)).cwiseAbs().maxCoeff() < 1e-15);

  Model<double> unit = Model<double>::zeros(s);
  unit.rules[0].b2(1, 0) = 1.0;
  normalize_grads(unit, 1e-300);
  CHECK(unit.rules[0].b2.norm() == doctest::Approx(1.0));
  CHECK_THROWS_AS(normalize_grads(unit, 0.0), UsageError);
}

TEST_CASE("config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.gamma = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.milestones = {500, 500};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.n_min = 60;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.tau = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.pool_size = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("worst members: floor(0.15 B), ties to the lower index") {
  CHECK(worst_members({0.1, 0.5, 0.2, 0.3, 0.9, 0.0, 0.4, 0.8}) == std::vector<std::size_t>{4});
  CHECK(worst_members(std::vector<double>(6, 1.0)).empty());
  CHECK(worst_members({1, 1, 1, 1, 1, 1, 1, 1}) == std::vector<std::size_t>{0});
  std::vector<double> twenty(20, 0.0);
  twenty[3] = 5;
  twenty[7] = 5;
  twenty[11] = 5;
  twenty[19] = 5;
  auto w = worst_members(twenty);
  std::sort(w.begin(), w.end());
  CHECK(w == std::vector<std::size_t>{3, 7, 11});
}

TEST_CASE("seed state") {
  const auto g = seed_state<float>(6, 5, 7, 2, 3);
  for (int c = 0; c < 6; ++c) CHECK(g.at(c, 2, 3) == (c >= 3 ? 1.0f : 0.0f));
  CHECK(g.data.sum() == 3.0f);
  CHECK_THROWS_AS(seed_state<float>(6, 5, 7, 5, 0), ConfigError);
}

TEST_CASE("identity model on a constant sequence does not drift") {
  ModelShape s;
  s.channels = 2;
  s.hidden = 4;
  s.residual = true;
  const Model<float> m = Model<float>::zeros(s);
  Grid<float> g(2, 4, 4);
  g.data.setConstant(0.25f);
  std::vector<Sequence<float>> seqs{Sequence<float>(5, g), Sequence<float>(5, g)};
  TrainConfig c;
  c.epochs = 5;
  c.window = 1;
  c.samples = 2;
  const auto res = train_timeseries(m, seqs, c);
  for (const auto& row : res.log) CHECK(row.loss == 0.0);
  res.model.visit([](const std::string&, const Mat<float>& p) { CHECK(p.isZero()); });
}

TEST_CASE("window larger than the sequences is a config error") {
  ModelShape s;
  s.channels = 2;
  s.hidden = 4;
  auto seqs = decay_sequences(2, 4, 1);
  TrainConfig c = small_config();
  c.window = 4;
  CHECK_THROWS_AS(train_timeseries(Model<float>::zeros(s), seqs, c), ConfigError);
  c.window = 3;
  c.epochs = 1;
  CHECK_NOTHROW(train_timeseries(Model<float>::zeros(s), seqs, c));
}

TEST_CASE("time-series training halves the loss on a toy set and is reproducible") {
  ModelShape s;
  s.channels = 2;
  s.hidden = 8;
  const auto seqs = decay_sequences(20, 6, 2);
  const auto init = Model<float>::initialize(s, RngStream(4));
  set_thread_count(1);
  const auto a = train_timeseries(init, seqs, small_config());
  REQUIRE(a.log.size() == 200);
  CHECK(a.log.front().lr == doctest::Approx(1e-2));
  CHECK(a.log.back().lr == doctest::Approx(1e-3));
  double head = 0, tail = 0;
  for (int i = 0; i < 10; ++i) {
    head += a.log[static_cast<std::size_t>(i)].loss;
    tail += a.log[a.log.size() - 1 - static_cast<std::size_t>(i)].loss;
  }
  CHECK(tail <= 0.5 * head);

  set_thread_count(3);
  const auto b = train_timeseries(init, seqs, small_config());
  set_thread_count(1);
  for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].loss == b.log[i].loss);
  CHECK(a.model.rules[0].w1 == b.model.rules[0].w1);
}

TEST_CASE("pool training keeps the pool size and is reproducible") {
  ModelShape s;
  s.variant = Variant::MncaNoise;
  s.channels = 6;
  s.hidden = 8;
  s.rules = 2;
  s.dropout = 0.1;
  Grid<float> target(4, 8, 8);
  for (int y = 2; y < 6; ++y) {
    for (int x = 2; x < 6; ++x) {
      for (int c = 0; c < 4; ++c) target.at(c, y, x) = 0.8f;
    }
  }
  TrainConfig c;
  c.epochs = 6;
  c.batch_size = 4;
  c.pool_size = 10;
  c.n_min = 2;
  c.n_max = 4;
  c.seed = 9;
  const auto init = Model<float>::initialize(s, RngStream(1));
  PoolState<float> pool_a, pool_b;
  const auto a = train_pool(init, target, c, &pool_a);
  set_thread_count(2);
  const auto b = train_pool(init, target, c, &pool_b);
  set_thread_count(1);
  CHECK(pool_a.slots.size() == 10);
  CHECK(pool_a.last_loss.size() == 10);
  for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].loss == b.log[i].loss);
  for (std::size_t i = 0; i < pool_a.slots.size(); ++i) CHECK(pool_a.slots[i].data == pool_b.slots[i].data);

  c.seed_y = 8;
  CHECK_THROWS_AS(train_pool(init, target, c), ConfigError);
}

}  // TEST_SUITE
