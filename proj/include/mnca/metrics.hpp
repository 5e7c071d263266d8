#pragma once

#include "mnca/tensor.hpp"
#include "mnca/tissue.hpp"

#include <array>
#include <span>
#include <vector>

namespace mnca {

/// Proportions of the five occupied types over the final grids of a cohort.
/// All zero when no cell is occupied.
std::array<double, kCellTypes> type_proportions(const TissueCohort& cohort);

/// KL(P || Q) in nats over the five occupied types. Q gets 1e-9 added to
/// every entry and is renormalized; terms with P(i) = 0 contribute 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// KL between the type proportions of the real and generated cohorts.
double kl_proportions(const TissueCohort& real, const TissueCohort& generated);

/// Exact 1-Wasserstein distance between two empirical distributions.
double wasserstein1(std::span<const double> u, std::span<const double> v);

int tissue_size(const CellGrid& grid);

/// Sites where the 3x3 Laplacian of the occupancy mask (zero padded) has
/// magnitude above `threshold`.
int border_complexity(const CellGrid& grid, double threshold = 0.1);

struct MetricReport {
  double kl_div = 0.0;
  double size_w = 0.0;
  double border_w = 0.0;
};

/// Metrics on the final grid of every realization.
MetricReport evaluate_cohorts(const TissueCohort& real, const TissueCohort& generated);

/// Mean squared error over the first four channels.
template <typename Scalar>
double rgba_mse(const Grid<Scalar>& grid, const Grid<Scalar>& target);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, 0 for a single value
};

MeanSd mean_sd(std::span<const double> values);

}  // namespace mnca
