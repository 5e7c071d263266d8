#pragma once

#include "mnca/rng.hpp"
#include "mnca/tensor.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace mnca {

enum CellType : std::uint8_t { EMPTY = 0, STEM = 1, INT1 = 2, INT2 = 3, DIFF1 = 4, DIFF2 = 5 };

inline constexpr int kCellTypes = 5;   // occupied types
inline constexpr int kCellLabels = 6;  // including EMPTY

std::string_view cell_type_name(int label);

struct CellGrid {
  int size = 0;
  std::vector<std::uint8_t> cells;  // row-major labels

  CellGrid() = default;
  explicit CellGrid(int n) : size(n), cells(static_cast<std::size_t>(n) * n, EMPTY) {}

  std::uint8_t& at(int y, int x) { return cells[static_cast<std::size_t>(y) * size + x]; }
  std::uint8_t at(int y, int x) const { return cells[static_cast<std::size_t>(y) * size + x]; }
  bool operator==(const CellGrid&) const = default;
};

using RateMatrix = std::array<std::array<double, kCellTypes>, kCellTypes>;

/// How neighbours feed the daughter-type rates of a dividing cell.
enum class InteractionMode {
  NeighborRows,  // k += I[type(n)] for every occupied Moore neighbour n
  PerType,       // k[j] += I[type(parent)][j] * (number of neighbours of type j)
};

struct SimParams {
  std::array<double, kCellTypes> b{};  // division
  std::array<double, kCellTypes> d{};  // death
  std::array<double, kCellTypes> s{};  // survival
  RateMatrix D{};
  RateMatrix I{};
  int size = 35;
  int steps = 35;
  int stem_min = 5;
  int stem_max = 15;
  InteractionMode interaction = InteractionMode::NeighborRows;

  void validate() const;
};

SimParams default_params();
SimParams minimal_params();

/// Type index helpers: rate arrays are indexed by label - 1.
inline int type_index(int label) { return label - 1; }

CellGrid init_grid(const SimParams& params, const RngStream& rng);

struct DivisionEvent {
  int parent_y, parent_x;
  std::uint8_t parent_type;
  int daughter_y, daughter_x;
  std::uint8_t daughter_type;
  std::array<int, kCellLabels> neighbor_counts;  // parent's Moore neighbourhood in G_t
};

struct StepStats {
  int zero_rate_cells = 0;      // occupied cells with b + d + s = 0
  int collisions = 0;           // divisions lost to an earlier claimant
  std::vector<DivisionEvent>* events = nullptr;
};

/// One synchronous update. Decisions read only `grid`; they are applied in
/// raster order, and when two parents pick the same empty site the first
/// one in raster order places its daughter. `visit_order` permutes the
/// decision pass (test hook; the result does not depend on it).
CellGrid sim_step(const CellGrid& grid, const SimParams& params, const RngStream& rng, std::uint64_t t,
                  StepStats* stats = nullptr, const std::vector<int>* visit_order = nullptr);

/// Full trajectory: initial grid followed by params.steps updates.
using Trajectory = std::vector<CellGrid>;

struct TissueCohort {
  std::vector<Trajectory> realizations;

  int size() const { return realizations.empty() ? 0 : realizations.front().front().size; }
  int steps() const { return realizations.empty() ? 0 : static_cast<int>(realizations.front().size()) - 1; }
};

Trajectory run_realization(const SimParams& params, const RngStream& rng, StepStats* stats = nullptr);

/// Realization r uses rng.fork(r).
TissueCohort run_cohort(const SimParams& params, int n_realizations, const RngStream& rng);

/// Channel 0 = EMPTY mask, channels 1..5 = the five types.
template <typename Scalar>
Grid<Scalar> one_hot(const CellGrid& grid);

/// Argmax over the first six channels, ties to the lowest label.
template <typename Scalar>
CellGrid decode(const Grid<Scalar>& state);

/// Binary cohort file: "MNCA-TIS", u32 version, u32 N, u32 T, u32 count,
/// then count * (T + 1) * N * N label bytes.
void save_cohort(const std::string& path, const TissueCohort& cohort);
TissueCohort load_cohort(const std::string& path);

}  // namespace mnca
