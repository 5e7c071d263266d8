#pragma once

#include "mnca/model.hpp"
#include "mnca/optim.hpp"

#include <functional>
#include <vector>

namespace mnca {

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 800;
  std::vector<int> milestones;
  double gamma = 0.1;
  double grad_eps = 1e-8;
  std::uint64_t seed = 0;
  double gumbel_temperature = 1.0;

  // Time-series training.
  int window = 8;
  int tau = 1;
  int samples = 8;  // sequences per minibatch

  // Pool training.
  int batch_size = 8;
  int pool_size = 1000;
  int n_min = 30;
  int n_max = 50;
  int seed_y = -1;  // -1: grid centre
  int seed_x = -1;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

struct LossRow {
  int epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
};

using EpochCallback = std::function<void(const LossRow&)>;

template <typename Scalar>
struct TrainResult {
  Model<Scalar> model;
  AdamState<Scalar> optimizer;
  std::vector<LossRow> log;
};

/// A tissue realization as a sequence of encoded grids, first state first.
template <typename Scalar>
using Sequence = std::vector<Grid<Scalar>>;

/// Windowed next-state regression on recorded trajectories. Each epoch draws
/// a window start and a minibatch of `samples` sequences; every supervision
/// point t in the window rolls the model `tau` steps from the recorded state
/// and takes one optimizer step on the MSE to the state at t + tau.
template <typename Scalar>
TrainResult<Scalar> train_timeseries(Model<Scalar> model, const std::vector<Sequence<Scalar>>& sequences,
                                     const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Seed state for pool training: zero except channels 3.. set to 1 at the seed pixel.
template <typename Scalar>
Grid<Scalar> seed_state(int channels, int height, int width, int seed_y, int seed_x);

template <typename Scalar>
struct PoolState {
  std::vector<Grid<Scalar>> slots;
  std::vector<double> last_loss;  // most recent loss per slot, NaN if never sampled
};

/// Indices of the floor(0.15 * B) largest losses; ties go to the lower index.
std::vector<std::size_t> worst_members(const std::vector<double>& losses);

/// Pool-based growth training on the RGBA target (first four channels).
template <typename Scalar>
TrainResult<Scalar> train_pool(Model<Scalar> model, const Grid<Scalar>& target, const TrainConfig& cfg,
                               PoolState<Scalar>* pool_out = nullptr, const EpochCallback& on_epoch = {});

}  // namespace mnca
