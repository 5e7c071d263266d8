#include "mnca/training.hpp"

#include "mnca/numerics.hpp"
#include "mnca/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mnca {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  for (std::size_t i = 1; i < milestones.size(); ++i) {
    if (milestones[i] <= milestones[i - 1]) throw ConfigError("milestones must be strictly increasing");
  }
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
  if (!(grad_eps > 0.0)) throw ConfigError("grad_eps must be positive");
  if (!(gumbel_temperature > 0.0)) throw ConfigError("gumbel_temperature must be positive");
  if (tau < 1) throw ConfigError("tau must be >= 1");
  if (window < tau) throw ConfigError("window must be >= tau");
  if (samples < 1) throw ConfigError("samples must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (pool_size < batch_size) throw ConfigError("pool_size must be >= batch_size");
  if (n_min < 1 || n_min > n_max) throw ConfigError("growth steps need 1 <= n_min <= n_max");
}

namespace {

enum StreamTag : std::uint64_t { kWindow = 1, kBatch = 2, kMember = 3, kGrowth = 4 };

/// First k entries of a seeded permutation of [0, n).
std::vector<std::size_t> draw_without_replacement(std::size_t n, std::size_t k, const RngStream& rng,
                                                  std::uint64_t step) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(n - 1), step, i, 0));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

template <typename Scalar>
void accumulate(Model<Scalar>& into, const Model<Scalar>& g) {
  std::vector<const Mat<Scalar>*> src;
  g.visit([&](const std::string&, const Mat<Scalar>& m) { src.push_back(&m); });
  std::size_t i = 0;
  into.visit([&](const std::string&, Mat<Scalar>& m) { m += *src[i++]; });
}

template <typename Scalar>
struct MemberOutcome {
  Model<Scalar> grads;
  double loss = 0.0;
  Grid<Scalar> final_state;
};

/// Rolls `steps` steps with tapes, takes MSE over `supervised` channels and
/// backpropagates with the gradient scaled by `weight`.
template <typename Scalar>
MemberOutcome<Scalar> member_pass(const Model<Scalar>& model, const Grid<Scalar>& start, const Mat<Scalar>& target,
                                  int supervised, int steps, double weight, const StepOptions& opts,
                                  const RngStream& rng) {
  std::vector<StepTape<Scalar>> tapes(static_cast<std::size_t>(steps));
  Grid<Scalar> x = start;
  for (int s = 0; s < steps; ++s) {
    try {
      x = step(model, x, opts, rng, static_cast<std::uint64_t>(s), &tapes[s]).grid;
    } catch (const NumericalDivergence& e) {
      throw NumericalDivergence("training rollout diverged at step " + std::to_string(s) + ": " + e.what());
    }
  }
  auto loss = mse_loss(x.data, target, supervised);
  loss.grad *= static_cast<Scalar>(weight);
  MemberOutcome<Scalar> out;
  out.grads = model.zeros_like();
  rollout_backward(model, tapes, loss.grad, out.grads);
  out.loss = loss.value;
  out.final_state = std::move(x);
  return out;
}

template <typename Scalar>
void check_finite(const Model<Scalar>& grads, int epoch) {
  grads.visit([&](const std::string& name, const Mat<Scalar>& m) {
    if (!m.allFinite()) {
      throw NumericalDivergence("non-finite gradient for " + name + " at epoch " + std::to_string(epoch));
    }
  });
}

StepOptions training_options(const TrainConfig& cfg) {
  StepOptions opts;
  opts.selection = SelectionMode::Sample;
  opts.train_mode = true;
  opts.gumbel_temperature = cfg.gumbel_temperature;
  return opts;
}

}  // namespace

template <typename Scalar>
TrainResult<Scalar> train_timeseries(Model<Scalar> model, const std::vector<Sequence<Scalar>>& sequences,
                                     const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (sequences.empty()) throw ConfigError("train_timeseries: no sequences");
  const std::size_t length = sequences.front().size();
  for (const auto& s : sequences) {
    if (s.size() != length) throw ConfigError("train_timeseries: sequences differ in length");
    for (const auto& g : s) {
      if (g.channels() > model.channels()) throw ConfigError("train_timeseries: sequence has more channels than the model");
    }
  }
  if (length < 2 || static_cast<std::size_t>(cfg.window) > length - 1) {
    throw ConfigError("train_timeseries: window " + std::to_string(cfg.window) + " does not fit sequences of " +
                      std::to_string(length) + " states");
  }
  const int channels = model.channels();
  auto lift = [&](const Grid<Scalar>& g) {
    if (g.channels() == channels) return g;
    Grid<Scalar> out(channels, g.height, g.width);
    out.data.topRows(g.channels()) = g.data;
    return out;
  };

  const RngStream root(cfg.seed);
  TrainResult<Scalar> result;
  result.optimizer = AdamState<Scalar>::for_model(model);
  const StepOptions opts = training_options(cfg);
  const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(cfg.samples), sequences.size());
  const auto last_start = static_cast<std::int64_t>(length - 1) - cfg.window;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto ep = static_cast<std::uint64_t>(epoch);
    const double lr = lr_at(cfg.learning_rate, cfg.milestones, cfg.gamma, epoch);
    const auto t_start = static_cast<int>(root.fork(kWindow).uniform_int(0, last_start, ep, 0, 0));
    const auto batch = draw_without_replacement(sequences.size(), m, root.fork(kBatch), ep);
    double epoch_loss = 0.0;
    int updates = 0;
    for (int t = t_start; t + cfg.tau <= t_start + cfg.window; t += cfg.tau) {
      std::vector<MemberOutcome<Scalar>> outcomes(m);
      parallel_for(m, [&](std::size_t i) {
        const auto& seq = sequences[batch[i]];
        const RngStream rng = root.fork(kMember).fork(ep * 1000003ull + static_cast<std::uint64_t>(t), i);
        Mat<Scalar> target = lift(seq[static_cast<std::size_t>(t + cfg.tau)]).data;
        outcomes[i] = member_pass(model, lift(seq[static_cast<std::size_t>(t)]), target, channels, cfg.tau,
                                  1.0 / static_cast<double>(m), opts, rng);
      });
      Model<Scalar> grads = model.zeros_like();
      double loss = 0.0;
      for (const auto& o : outcomes) {
        accumulate(grads, o.grads);
        loss += o.loss;
      }
      check_finite(grads, epoch);
      normalize_grads(grads, cfg.grad_eps);
      adam_update(model, grads, result.optimizer, lr);
      epoch_loss += loss / static_cast<double>(m);
      ++updates;
    }
    LossRow row{epoch, epoch_loss / std::max(updates, 1), lr};
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  result.model = std::move(model);
  return result;
}

template <typename Scalar>
Grid<Scalar> seed_state(int channels, int height, int width, int seed_y, int seed_x) {
  if (seed_y < 0 || seed_y >= height || seed_x < 0 || seed_x >= width) {
    throw ConfigError("seed pixel (" + std::to_string(seed_y) + ", " + std::to_string(seed_x) + ") outside the " +
                      std::to_string(height) + "x" + std::to_string(width) + " grid");
  }
  Grid<Scalar> g(channels, height, width);
  for (int c = 3; c < channels; ++c) g.at(c, seed_y, seed_x) = Scalar(1);
  return g;
}

std::vector<std::size_t> worst_members(const std::vector<double>& losses) {
  const std::size_t k = static_cast<std::size_t>(std::floor(0.15 * static_cast<double>(losses.size())));
  std::vector<std::size_t> order(losses.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return losses[a] > losses[b]; });
  order.resize(k);
  return order;
}

template <typename Scalar>
TrainResult<Scalar> train_pool(Model<Scalar> model, const Grid<Scalar>& target, const TrainConfig& cfg,
                               PoolState<Scalar>* pool_out, const EpochCallback& on_epoch) {
  cfg.validate();
  if (target.channels() != 4) throw ConfigError("train_pool: target must have 4 (RGBA) channels");
  if (model.channels() < 4) throw ConfigError("train_pool: state dimension must be >= 4");
  const int sy = cfg.seed_y < 0 ? target.height / 2 : cfg.seed_y;
  const int sx = cfg.seed_x < 0 ? target.width / 2 : cfg.seed_x;
  const Grid<Scalar> seed = seed_state<Scalar>(model.channels(), target.height, target.width, sy, sx);

  PoolState<Scalar> pool;
  pool.slots.assign(static_cast<std::size_t>(cfg.pool_size), seed);
  pool.last_loss.assign(static_cast<std::size_t>(cfg.pool_size), std::numeric_limits<double>::quiet_NaN());

  const RngStream root(cfg.seed);
  TrainResult<Scalar> result;
  result.optimizer = AdamState<Scalar>::for_model(model);
  const StepOptions opts = training_options(cfg);
  const auto b = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto ep = static_cast<std::uint64_t>(epoch);
    const double lr = lr_at(cfg.learning_rate, cfg.milestones, cfg.gamma, epoch);
    const auto batch = draw_without_replacement(pool.slots.size(), b, root.fork(kBatch), ep);
    const int n = static_cast<int>(root.fork(kGrowth).uniform_int(cfg.n_min, cfg.n_max, ep, 0, 0));
    std::vector<MemberOutcome<Scalar>> outcomes(b);
    parallel_for(b, [&](std::size_t i) {
      const RngStream rng = root.fork(kMember).fork(ep, i);
      outcomes[i] = member_pass(model, pool.slots[batch[i]], target.data, 4, n, 1.0 / static_cast<double>(b), opts, rng);
    });
    Model<Scalar> grads = model.zeros_like();
    std::vector<double> losses(b);
    double loss = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      accumulate(grads, outcomes[i].grads);
      losses[i] = outcomes[i].loss;
      loss += outcomes[i].loss;
    }
    check_finite(grads, epoch);
    normalize_grads(grads, cfg.grad_eps);
    adam_update(model, grads, result.optimizer, lr);

    for (std::size_t i = 0; i < b; ++i) {
      pool.slots[batch[i]] = std::move(outcomes[i].final_state);
      pool.last_loss[batch[i]] = losses[i];
    }
    for (std::size_t i : worst_members(losses)) pool.slots[batch[i]] = seed;

    LossRow row{epoch, loss / static_cast<double>(b), lr};
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  if (pool_out) *pool_out = std::move(pool);
  result.model = std::move(model);
  return result;
}

#define MNCA_INSTANTIATE(S)                                                                                      \
  template TrainResult<S> train_timeseries<S>(Model<S>, const std::vector<Sequence<S>>&, const TrainConfig&,    \
                                              const EpochCallback&);                                            \
  template Grid<S> seed_state<S>(int, int, int, int, int);                                                      \
  template TrainResult<S> train_pool<S>(Model<S>, const Grid<S>&, const TrainConfig&, PoolState<S>*,            \
                                        const EpochCallback&);

MNCA_INSTANTIATE(float)
MNCA_INSTANTIATE(double)

#undef MNCA_INSTANTIATE

}  // namespace mnca
