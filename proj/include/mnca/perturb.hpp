#pragma once

#include "mnca/model.hpp"

#include <string_view>
#include <vector>

namespace mnca {

enum class PerturbKind { Chunk, Noise, Sparse };

PerturbKind parse_perturb_kind(std::string_view name);
std::string_view to_string(PerturbKind kind);

struct Perturbation {
  PerturbKind kind = PerturbKind::Chunk;
  int side = 5;          // chunk box side; 0 leaves the grid untouched
  double rho = 0.1;      // noise: fraction of pixels
  int count = 100;       // sparse: pixels removed
  double sigma = 1.0;    // noise standard deviation
  bool visible_only = false;  // noise touches only the first four channels

  void validate(int height, int width) const;
};

/// Returns the perturbed copy. `support`, when given, receives a per-pixel
/// flag of the pixels that were touched.
template <typename Scalar>
Grid<Scalar> apply_perturbation(const Grid<Scalar>& grid, const Perturbation& p, const RngStream& rng,
                                std::vector<std::uint8_t>* support = nullptr);

struct RecoveryResult {
  std::vector<std::vector<double>> curves;  // per repeat, MSE at steps 0..steps (shorter if failed)
  std::vector<std::uint8_t> failed;         // 1 when the repeat diverged
  double final_mean = 0.0;                  // over repeats that did not diverge
  double final_sd = 0.0;
  double ci95 = 0.0;                        // 1.96 * sd / sqrt(n)
  int completed = 0;

  /// Per-step mean over completed repeats.
  std::vector<double> mean_curve() const;
};

/// Repeat r perturbs with rng.fork(r).fork(0) and rolls out with
/// rng.fork(r).fork(1); MSE is measured before the first step and after each.
template <typename Scalar>
RecoveryResult recovery_experiment(const Model<Scalar>& model, const Grid<Scalar>& state, const Grid<Scalar>& target,
                                   const Perturbation& p, int repeats, int steps, const StepOptions& opts,
                                   const RngStream& rng);

}  // namespace mnca
