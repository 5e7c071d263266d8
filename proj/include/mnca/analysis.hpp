#pragma once

#include "mnca/model.hpp"
#include "mnca/tissue.hpp"
#include "mnca/training.hpp"

#include <Eigen/Dense>

#include <vector>

namespace mnca {

struct RuleMap {
  Mat<float> probs;          // K x pixels
  std::vector<int> argmax;   // per pixel, ties to the lowest rule
  int height = 0;
  int width = 0;
};

template <typename Scalar>
RuleMap rule_map(const Model<Scalar>& model, const Grid<Scalar>& grid, const std::vector<double>& steering = {});

struct SpectralEstimate {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;  // estimate after every iteration
};

/// Largest singular value by power iteration on M^T M, with the Rayleigh
/// quotient ||M v|| as the estimate. Stops when successive estimates differ
/// by less than tol * estimate.
SpectralEstimate spectral_norm(const Eigen::MatrixXd& m, int max_iters = 20000, double tol = 1e-13);

/// Operator-norm bound of the perception stage ([I; Sx; Sy] per channel):
/// sqrt(1 + 8^2 + 8^2).
double sobel_bound();

struct LipschitzReport {
  std::vector<double> rule_bounds;  // sigma_max(W1) * sigma_max(W2) per rule
  std::vector<double> weights;      // spatial mean selector probability per rule
  double mixture_bound = 0.0;       // sum_k weights[k] * rule_bounds[k]
  double sobel_factor = 0.0;        // reported separately, not multiplied in
  bool converged = true;
};

/// `reference` supplies the state on which the selector weights are
/// averaged; it is ignored for single-rule models.
template <typename Scalar>
LipschitzReport lipschitz_report(const Model<Scalar>& model, const Grid<Scalar>* reference = nullptr);

struct NoiseSample {
  double noise = 0.0;
  int outcome = 0;
};

struct NoisePartition {
  std::vector<Index> pixels;
  std::vector<std::vector<NoiseSample>> samples;  // per designated pixel, one entry per draw
  int classes = 0;
  std::vector<double> class_frequency;  // pooled over pixels and draws
  std::vector<double> class_noise_mean; // NaN when a class never occurs
  double statistic = 0.0;               // between-class sum of squares of noise
  double p_value = 1.0;                 // permutation test of noise vs outcome
};

/// Repeats a single argmax-selection step from `state` n_draws times (draw d
/// uses RNG step coordinate d), recording at each designated pixel the
/// injected noise and the argmax over the first `classes` output channels.
template <typename Scalar>
NoisePartition noise_partition(const Model<Scalar>& model, const Grid<Scalar>& state, const std::vector<Index>& pixels,
                               int n_draws, int classes, const RngStream& rng, int permutations = 2000);

/// Permutation p-value for dependence between a real sample and labels:
/// statistic is the between-label sum of squares.
double between_class_ss(const std::vector<NoiseSample>& samples, int classes);
double permutation_p_value(const std::vector<NoiseSample>& samples, int classes, int permutations, const RngStream& rng);

struct SweepRow {
  int rules = 0;
  int repeat = 0;
  double kl = 0.0;
  std::string error;  // non-empty when this cell failed
};

/// Trains a fresh mixture model per (rule count, repeat) on the cohort and
/// scores generated tissues by KL on type proportions.
std::vector<SweepRow> rules_sweep(const ModelShape& base, const TrainConfig& train, const TissueCohort& cohort,
                                  const std::vector<int>& rule_counts, int repeats, std::uint64_t seed);

}  // namespace mnca
