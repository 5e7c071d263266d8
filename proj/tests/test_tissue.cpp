#include "mnca/metrics.hpp"
#include "mnca/tissue.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

using namespace mnca;

namespace {

SimParams small_default(int size = 15, int steps = 12) {
  SimParams p = default_params();
  p.size = size;
  p.steps = steps;
  return p;
}

int occupied(const CellGrid& g) {
  return static_cast<int>(std::count_if(g.cells.begin(), g.cells.end(), [](std::uint8_t c) { return c != EMPTY; }));
}

}  // namespace

TEST_SUITE("tissuesim") {

TEST_CASE("printed rate tables") {
  const SimParams p = default_params();
  CHECK(p.D[type_index(STEM)][type_index(INT1)] == 0.8);
  CHECK(p.D[type_index(STEM)][type_index(STEM)] == 0.3);
  CHECK(p.D[type_index(INT2)][type_index(DIFF2)] == 0.0);
  CHECK(p.I[type_index(DIFF1)][type_index(DIFF2)] == 0.3);
  double total = 0;
  for (const auto& row : p.I) total += std::accumulate(row.begin(), row.end(), 0.0);
  CHECK(total == doctest::Approx(0.3));
  CHECK(p.b[type_index(STEM)] == 0.8);
  CHECK(p.s[type_index(STEM)] == 0.0);

  const SimParams m = minimal_params();
  CHECK(m.d[type_index(STEM)] == 0.05);
  CHECK(m.b[type_index(STEM)] == 0.8);
  CHECK(m.b[type_index(DIFF1)] == 0.0);
  CHECK(m.D[type_index(STEM)][type_index(DIFF1)] == 0.1);
  CHECK(m.D[type_index(DIFF1)][type_index(DIFF1)] == 1.0);
  for (const auto& row : m.I) {
    for (double v : row) CHECK(v == 0.0);
  }
}

TEST_CASE("initial grid: stem cluster in the central block") {
  const SimParams p = default_params();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const CellGrid g = init_grid(p, RngStream(seed));
    const int n = occupied(g);
    CHECK(n >= 5);
    CHECK(n <= 15);
    for (int y = 0; y < g.size; ++y) {
      for (int x = 0; x < g.size; ++x) {
        if (g.at(y, x) == EMPTY) continue;
        CHECK(g.at(y, x) == STEM);
        CHECK(y >= 14);
        CHECK(y < 21);
        CHECK(x >= 14);
        CHECK(x < 21);
      }
    }
  }
  SimParams bad = p;
  bad.stem_max = 60;
  CHECK_THROWS_AS(init_grid(bad, RngStream(0)), ConfigError);
}

TEST_CASE("trivial dynamics") {
  const SimParams p = default_params();
  const CellGrid empty(9);
  CHECK(sim_step(empty, p, RngStream(1), 0).cells == empty.cells);

  SimParams death = p;
  death.b.fill(0.0);
  death.s.fill(0.0);
  death.d.fill(1.0);
  CellGrid full(6);
  std::fill(full.cells.begin(), full.cells.end(), INT1);
  CHECK(occupied(sim_step(full, death, RngStream(2), 0)) == 0);

  // A boxed-in stem cell cannot divide and survives.
  CellGrid boxed(3);
  std::fill(boxed.cells.begin(), boxed.cells.end(), DIFF1);
  boxed.at(1, 1) = STEM;
  SimParams still = p;
  still.d.fill(0.0);
  still.b[type_index(DIFF1)] = 0.0;
  const CellGrid next = sim_step(boxed, still, RngStream(3), 0);
  CHECK(next.at(1, 1) == STEM);
}

TEST_CASE("single stem daughters follow the normalized differentiation row") {
  CellGrid g(5);
  g.at(2, 2) = STEM;
  const SimParams p = default_params();
  std::array<int, kCellLabels> counts{};
  const int trials = 4000;
  for (int t = 0; t < trials; ++t) {
    const CellGrid next = sim_step(g, p, RngStream(11), static_cast<std::uint64_t>(t));
    REQUIRE(next.at(2, 2) == STEM);
    REQUIRE(occupied(next) == 2);
    for (std::size_t i = 0; i < next.cells.size(); ++i) {
      if (i != 12 && next.cells[i] != EMPTY) ++counts[next.cells[i]];
    }
  }
  const double p_int1 = 8.0 / 11.0;
  const double sd = std::sqrt(p_int1 * (1 - p_int1) / trials);
  CHECK(std::abs(counts[INT1] / double(trials) - p_int1) < 4 * sd);
  CHECK(counts[STEM] + counts[INT1] == trials);
}

TEST_CASE("decisions read only the previous grid") {
  const SimParams p = small_default();
  const Trajectory traj = run_realization(p, RngStream(4));
  const CellGrid& g = traj[6];
  std::vector<int> order(g.cells.size());
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.end());
  const CellGrid a = sim_step(g, p, RngStream(5), 6);
  const CellGrid b = sim_step(g, p, RngStream(5), 6, nullptr, &order);
  CHECK(a.cells == b.cells);
}

TEST_CASE("daughters only land on empty sites and occupancy never drops without death") {
  SimParams p = small_default(13, 15);
  p.d.fill(0.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Trajectory traj = run_realization(p, RngStream(seed));
    for (std::size_t t = 1; t < traj.size(); ++t) {
      CHECK(occupied(traj[t]) >= occupied(traj[t - 1]));
    }
  }
  const SimParams q = small_default();
  std::vector<DivisionEvent> events;
  StepStats stats;
  stats.events = &events;
  const Trajectory traj = run_realization(q, RngStream(7));
  for (std::size_t t = 0; t + 1 < traj.size(); ++t) {
    events.clear();
    sim_step(traj[t], q, RngStream(7).fork(1), t, &stats);
    for (const auto& e : events) {
      CHECK(traj[t].at(e.daughter_y, e.daughter_x) == EMPTY);
      CHECK(std::max(std::abs(e.daughter_y - e.parent_y), std::abs(e.daughter_x - e.parent_x)) == 1);
    }
  }
}

TEST_CASE("INT2 to DIFF2 needs a DIFF1 neighbour") {
  const SimParams p = small_default(21, 25);
  int transitions = 0;
  for (std::uint64_t r = 0; r < 20; ++r) {
    const RngStream rng = RngStream(21).fork(r);
    CellGrid g = init_grid(p, rng.fork(0));
    std::vector<DivisionEvent> events;
    StepStats stats;
    stats.events = &events;
    for (int t = 0; t < p.steps; ++t) {
      events.clear();
      const CellGrid next = sim_step(g, p, rng.fork(1), static_cast<std::uint64_t>(t), &stats);
      for (const auto& e : events) {
        if (e.parent_type == INT2 && e.daughter_type == DIFF2) {
          ++transitions;
          CHECK(e.neighbor_counts[DIFF1] >= 1);
        }
      }
      g = next;
    }
  }
  CHECK(transitions > 0);
}

TEST_CASE("negative daughter weights are clamped") {
  SimParams p = default_params();
  p.I[type_index(DIFF1)][type_index(STEM)] = -50.0;
  CellGrid g(5);
  g.at(2, 2) = STEM;
  g.at(1, 1) = DIFF1;
  for (int t = 0; t < 200; ++t) {
    const CellGrid next = sim_step(g, p, RngStream(2), static_cast<std::uint64_t>(t));
    for (std::size_t i = 0; i < next.cells.size(); ++i) {
      // STEM weight 0.3 - 50 clamps to 0; the DIFF1 neighbour adds 0.3 to DIFF2.
      if (i != 12 && i != 6 && next.cells[i] != EMPTY) CHECK((next.cells[i] == INT1 || next.cells[i] == DIFF2));
    }
  }
}

TEST_CASE("stem death frequency in the two-type model") {
  SimParams p = minimal_params();
  p.size = 15;
  p.steps = 15;
  const TissueCohort c = run_cohort(p, 40, RngStream(3));
  long stems = 0, died = 0;
  for (const auto& traj : c.realizations) {
    for (std::size_t t = 0; t + 1 < traj.size(); ++t) {
      for (std::size_t i = 0; i < traj[t].cells.size(); ++i) {
        if (traj[t].cells[i] != STEM) continue;
        ++stems;
        died += traj[t + 1].cells[i] == EMPTY ? 1 : 0;
      }
    }
  }
  const double expect = 0.05 / (0.8 + 0.05 + 1.0);
  const double sd = std::sqrt(expect * (1 - expect) / static_cast<double>(stems));
  CHECK(std::abs(static_cast<double>(died) / stems - expect) < 3 * sd);
}

TEST_CASE("cohorts are deterministic and independent of threads") {
  const SimParams p = small_default();
  const TissueCohort a = run_cohort(p, 6, RngStream(9));
  const TissueCohort b = run_cohort(p, 6, RngStream(9));
  REQUIRE(a.realizations.size() == 6);
  CHECK(a.steps() == 12);
  CHECK(a.size() == 15);
  for (std::size_t r = 0; r < 6; ++r) {
    for (int t = 0; t <= 12; ++t) CHECK(a.realizations[r][static_cast<std::size_t>(t)].cells == b.realizations[r][static_cast<std::size_t>(t)].cells);
  }
  CHECK(a.realizations[0].back().cells != a.realizations[1].back().cells);
}

TEST_CASE("one-hot encoding") {
  const CellGrid empty(4);
  const Grid<float> e = one_hot<float>(empty);
  CHECK(e.data.row(0).minCoeff() == 1.0f);
  const Trajectory traj = run_realization(small_default(), RngStream(1));
  const Grid<double> h = one_hot<double>(traj.back());
  CHECK((h.data.colwise().sum().array() == 1.0).all());
  CHECK(decode(h).cells == traj.back().cells);
}

TEST_CASE("cohort files round trip and reject damage") {
  const auto dir = std::filesystem::temp_directory_path() / "mnca_tissue_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "c.bin").string();
  const TissueCohort a = run_cohort(small_default(9, 5), 3, RngStream(2));
  save_cohort(path, a);
  const TissueCohort b = load_cohort(path);
  REQUIRE(b.realizations.size() == 3);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t t = 0; t < 6; ++t) CHECK(a.realizations[r][t].cells == b.realizations[r][t].cells);
  }
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 7);
  CHECK_THROWS_AS(load_cohort(path), ConfigError);
  {
    std::ofstream f(path, std::ios::binary);
    f << "NOTACOHORT";
  }
  CHECK_THROWS_AS(load_cohort(path), ConfigError);
  CHECK_THROWS_AS(load_cohort((dir / "missing.bin").string()), ConfigError);
}

}  // TEST_SUITE
