#include "mnca/tissue.hpp"

#include "mnca/parallel.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>

namespace mnca {

std::string_view cell_type_name(int label) {
  static constexpr std::array<std::string_view, kCellLabels> names{"empty", "stem", "int1", "int2", "diff1", "diff2"};
  if (label < 0 || label >= kCellLabels) throw UsageError("invalid cell label " + std::to_string(label));
  return names[static_cast<std::size_t>(label)];
}

void SimParams::validate() const {
  for (int i = 0; i < kCellTypes; ++i) {
    if (!(b[i] >= 0.0) || !(d[i] >= 0.0) || !(s[i] >= 0.0)) throw ConfigError("tissue rates b, d, s must be >= 0");
  }
  if (size < 1) throw ConfigError("tissue grid size must be >= 1");
  if (steps < 0) throw ConfigError("tissue steps must be >= 0");
  if (stem_min < 0 || stem_min > stem_max) throw ConfigError("stem cell range must satisfy 0 <= min <= max");
  const int block = std::min(size, 7);
  if (stem_max > block * block) throw ConfigError("stem cell range exceeds the central block");
}

SimParams default_params() {
  SimParams p;
  p.b = {0.8, 0.5, 0.5, 0.0, 0.0};
  p.d = {0.0, 0.0, 0.0, 0.001, 0.001};
  p.s = {0.0, 0.0, 0.01, 1.0, 1.0};
  p.D = {{{0.3, 0.8, 0.0, 0.0, 0.0},
          {0.1, 0.2, 0.8, 0.0, 0.0},
          {0.0, 0.0, 0.2, 1.0, 0.0},
          {0.0, 0.0, 0.0, 1.0, 0.0},
          {0.0, 0.0, 0.0, 0.0, 1.0}}};
  p.I = {};
  p.I[type_index(DIFF1)][type_index(DIFF2)] = 0.3;
  return p;
}

SimParams minimal_params() {
  SimParams p;
  p.b = {0.8, 0.0, 0.0, 0.0, 0.0};
  p.d = {0.05, 0.0, 0.0, 0.0, 0.0};
  p.s = {1.0, 0.0, 0.0, 1.0, 0.0};
  p.D = {};
  p.D[type_index(STEM)][type_index(DIFF1)] = 0.1;
  p.D[type_index(DIFF1)][type_index(DIFF1)] = 1.0;
  p.I = {};
  return p;
}

CellGrid init_grid(const SimParams& params, const RngStream& rng) {
  params.validate();
  const int n = params.size;
  const int block = std::min(n, 7);
  const int y0 = (n - block) / 2;
  const int x0 = (n - block) / 2;
  const auto count = static_cast<int>(rng.uniform_int(params.stem_min, params.stem_max, 0, 0, 0));
  std::vector<int> sites(static_cast<std::size_t>(block * block));
  std::iota(sites.begin(), sites.end(), 0);
  for (int i = 0; i < count; ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(i, block * block - 1, 0, 1, static_cast<std::uint64_t>(i)));
    std::swap(sites[static_cast<std::size_t>(i)], sites[j]);
  }
  CellGrid g(n);
  for (int i = 0; i < count; ++i) g.at(y0 + sites[i] / block, x0 + sites[i] % block) = STEM;
  return g;
}

namespace {

struct Decision {
  enum Kind : std::uint8_t { Survive, Die, Divide } kind = Survive;
  int target = -1;
  std::uint8_t daughter = EMPTY;
};

enum Draw : std::uint64_t { kEvent = 0, kNeighbor = 1, kDaughter = 2 };

constexpr int kDy[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
constexpr int kDx[8] = {-1, 0, 1, -1, 1, -1, 0, 1};

}  // namespace

CellGrid sim_step(const CellGrid& grid, const SimParams& params, const RngStream& rng, std::uint64_t t,
                  StepStats* stats, const std::vector<int>* visit_order) {
  const int n = grid.size;
  const int cells = n * n;
  std::vector<Decision> decisions(static_cast<std::size_t>(cells));
  std::vector<std::array<int, kCellLabels>> neighbors(static_cast<std::size_t>(cells));
  std::vector<std::uint8_t> zero_rate(static_cast<std::size_t>(cells), 0);

  auto decide = [&](int idx) {
    const std::uint8_t label = grid.cells[static_cast<std::size_t>(idx)];
    if (label == EMPTY) return;
    const int ti = type_index(label);
    const double total = params.b[ti] + params.d[ti] + params.s[ti];
    if (!(total > 0.0)) {
      zero_rate[static_cast<std::size_t>(idx)] = 1;
      return;
    }
    const int y = idx / n;
    const int x = idx % n;
    const auto cell = static_cast<std::uint64_t>(idx);
    const double rho = rng.uniform(t, cell, kEvent);
    const double p_death = params.d[ti] / total;
    const double p_div = params.b[ti] / total;
    Decision& dec = decisions[static_cast<std::size_t>(idx)];
    if (rho < p_death) {
      dec.kind = Decision::Die;
      return;
    }
    if (!(rho < p_death + p_div)) return;

    std::array<int, kCellLabels> counts{};
    int empties[8];
    int n_empty = 0;
    for (int k = 0; k < 8; ++k) {
      const int yy = y + kDy[k];
      const int xx = x + kDx[k];
      if (yy < 0 || yy >= n || xx < 0 || xx >= n) continue;
      const std::uint8_t nl = grid.at(yy, xx);
      ++counts[nl];
      if (nl == EMPTY) empties[n_empty++] = yy * n + xx;
    }
    neighbors[static_cast<std::size_t>(idx)] = counts;
    if (n_empty == 0) return;
    const int target = empties[rng.uniform_int(0, n_empty - 1, t, cell, kNeighbor)];

    std::array<double, kCellTypes> k = params.D[ti];
    for (int j = 1; j < kCellLabels; ++j) {
      if (counts[j] == 0) continue;
      for (int c = 0; c < kCellTypes; ++c) {
        if (params.interaction == InteractionMode::NeighborRows) {
          k[c] += counts[j] * params.I[type_index(j)][c];
        } else if (c == type_index(j)) {
          k[c] += counts[j] * params.I[ti][c];
        }
      }
    }
    double sum = 0.0;
    for (double& v : k) {
      v = std::max(v, 0.0);
      sum += v;
    }
    if (!(sum > 0.0)) return;
    std::array<double, kCellTypes> probs;
    for (int c = 0; c < kCellTypes; ++c) probs[c] = k[c] / sum;
    dec.kind = Decision::Divide;
    dec.target = target;
    dec.daughter = static_cast<std::uint8_t>(1 + rng.categorical(probs, t, cell, kDaughter));
  };

  if (visit_order) {
    if (static_cast<int>(visit_order->size()) != cells) throw UsageError("sim_step: visit order has wrong length");
    for (int idx : *visit_order) decide(idx);
  } else {
    for (int idx = 0; idx < cells; ++idx) decide(idx);
  }

  CellGrid next = grid;
  std::vector<std::uint8_t> claimed(static_cast<std::size_t>(cells), 0);
  for (int idx = 0; idx < cells; ++idx) {
    const Decision& dec = decisions[static_cast<std::size_t>(idx)];
    if (stats && zero_rate[static_cast<std::size_t>(idx)]) ++stats->zero_rate_cells;
    if (dec.kind == Decision::Die) {
      next.cells[static_cast<std::size_t>(idx)] = EMPTY;
    } else if (dec.kind == Decision::Divide) {
      if (claimed[static_cast<std::size_t>(dec.target)]) {
        if (stats) ++stats->collisions;
        continue;
      }
      claimed[static_cast<std::size_t>(dec.target)] = 1;
      next.cells[static_cast<std::size_t>(dec.target)] = dec.daughter;
      if (stats && stats->events) {
        stats->events->push_back({idx / n, idx % n, grid.cells[static_cast<std::size_t>(idx)], dec.target / n,
                                  dec.target % n, dec.daughter, neighbors[static_cast<std::size_t>(idx)]});
      }
    }
  }
  return next;
}

Trajectory run_realization(const SimParams& params, const RngStream& rng, StepStats* stats) {
  Trajectory traj;
  traj.reserve(static_cast<std::size_t>(params.steps) + 1);
  traj.push_back(init_grid(params, rng.fork(0)));
  const RngStream dyn = rng.fork(1);
  for (int t = 0; t < params.steps; ++t) traj.push_back(sim_step(traj.back(), params, dyn, static_cast<std::uint64_t>(t), stats));
  return traj;
}

TissueCohort run_cohort(const SimParams& params, int n_realizations, const RngStream& rng) {
  if (n_realizations < 1) throw UsageError("run_cohort: need at least one realization");
  params.validate();
  TissueCohort cohort;
  cohort.realizations.resize(static_cast<std::size_t>(n_realizations));
  parallel_for(cohort.realizations.size(), [&](std::size_t r) {
    cohort.realizations[r] = run_realization(params, rng.fork(static_cast<std::uint64_t>(r)));
  });
  return cohort;
}

template <typename Scalar>
Grid<Scalar> one_hot(const CellGrid& grid) {
  Grid<Scalar> g(kCellLabels, grid.size, grid.size);
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    const std::uint8_t label = grid.cells[i];
    if (label >= kCellLabels) throw UsageError("one_hot: invalid label " + std::to_string(label));
    g.data(label, static_cast<Index>(i)) = Scalar(1);
  }
  return g;
}

template <typename Scalar>
CellGrid decode(const Grid<Scalar>& state) {
  if (state.channels() < kCellLabels) throw UsageError("decode: state needs at least 6 channels");
  if (state.height != state.width) throw UsageError("decode: tissue grids are square");
  CellGrid g(state.height);
  for (Index p = 0; p < state.pixels(); ++p) {
    int best = 0;
    for (int c = 1; c < kCellLabels; ++c) {
      if (state.data(c, p) > state.data(best, p)) best = c;
    }
    g.cells[static_cast<std::size_t>(p)] = static_cast<std::uint8_t>(best);
  }
  return g;
}

template Grid<float> one_hot<float>(const CellGrid&);
template Grid<double> one_hot<double>(const CellGrid&);
template CellGrid decode<float>(const Grid<float>&);
template CellGrid decode<double>(const Grid<double>&);

namespace {

constexpr char kMagic[8] = {'M', 'N', 'C', 'A', '-', 'T', 'I', 'S'};
constexpr std::uint32_t kCohortVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw ConfigError("cohort file truncated in header");
  return bytes[0] | (bytes[1] << 8) | (bytes[2] << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

}  // namespace

void save_cohort(const std::string& path, const TissueCohort& cohort) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write cohort file " + path);
  out.write(kMagic, 8);
  put_u32(out, kCohortVersion);
  put_u32(out, static_cast<std::uint32_t>(cohort.size()));
  put_u32(out, static_cast<std::uint32_t>(cohort.steps()));
  put_u32(out, static_cast<std::uint32_t>(cohort.realizations.size()));
  for (const auto& traj : cohort.realizations) {
    if (static_cast<int>(traj.size()) != cohort.steps() + 1) throw UsageError("save_cohort: ragged cohort");
    for (const auto& g : traj) {
      if (g.size != cohort.size()) throw UsageError("save_cohort: grids differ in size");
      out.write(reinterpret_cast<const char*>(g.cells.data()), static_cast<std::streamsize>(g.cells.size()));
    }
  }
  if (!out) throw ConfigError("failed writing cohort file " + path);
}

TissueCohort load_cohort(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open cohort file " + path);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw ConfigError(path + " is not a cohort file");
  if (get_u32(in) != kCohortVersion) throw ConfigError(path + ": unsupported cohort version");
  const std::uint32_t n = get_u32(in);
  const std::uint32_t steps = get_u32(in);
  const std::uint32_t count = get_u32(in);
  TissueCohort cohort;
  cohort.realizations.resize(count);
  for (auto& traj : cohort.realizations) {
    traj.resize(steps + 1);
    for (auto& g : traj) {
      g = CellGrid(static_cast<int>(n));
      if (!in.read(reinterpret_cast<char*>(g.cells.data()), static_cast<std::streamsize>(g.cells.size()))) {
        throw ConfigError(path + ": cohort data truncated");
      }
      for (auto c : g.cells) {
        if (c >= kCellLabels) throw ConfigError(path + ": invalid cell label in cohort data");
      }
    }
  }
  return cohort;
}

}  // namespace mnca
