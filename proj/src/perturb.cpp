#include "mnca/perturb.hpp"

#include "mnca/metrics.hpp"
#include "mnca/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mnca {

PerturbKind parse_perturb_kind(std::string_view name) {
  if (name == "chunk") return PerturbKind::Chunk;
  if (name == "noise") return PerturbKind::Noise;
  if (name == "sparse") return PerturbKind::Sparse;
  throw ConfigError("unknown perturbation '" + std::string(name) + "' (expected chunk, noise or sparse)");
}

std::string_view to_string(PerturbKind kind) {
  switch (kind) {
    case PerturbKind::Chunk: return "chunk";
    case PerturbKind::Noise: return "noise";
    case PerturbKind::Sparse: return "sparse";
  }
  return "unknown";
}

void Perturbation::validate(int height, int width) const {
  switch (kind) {
    case PerturbKind::Chunk:
      if (side < 0) throw ConfigError("chunk side must be >= 0");
      break;
    case PerturbKind::Noise:
      if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError("noise fraction must lie in (0, 1]");
      if (!(sigma >= 0.0)) throw ConfigError("noise sigma must be >= 0");
      break;
    case PerturbKind::Sparse:
      if (count < 0 || static_cast<long long>(count) > static_cast<long long>(height) * width) {
        throw ConfigError("sparse count must lie in [0, H*W]");
      }
      break;
  }
}

namespace {

std::vector<Index> distinct_pixels(Index n, Index k, const RngStream& rng) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  for (Index i = 0; i < k; ++i) {
    const auto j = rng.uniform_int(i, n - 1, 1, static_cast<std::uint64_t>(i), 0);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

}  // namespace

template <typename Scalar>
Grid<Scalar> apply_perturbation(const Grid<Scalar>& grid, const Perturbation& p, const RngStream& rng,
                                std::vector<std::uint8_t>* support) {
  if (grid.channels() < 4) throw UsageError("apply_perturbation: grid needs at least four channels");
  p.validate(grid.height, grid.width);
  Grid<Scalar> out = grid;
  const Index n = grid.pixels();
  std::vector<std::uint8_t> touched(static_cast<std::size_t>(n), 0);
  switch (p.kind) {
    case PerturbKind::Chunk: {
      if (p.side == 0) break;
      const auto cy = static_cast<int>(rng.uniform_int(0, grid.height - 1, 0, 0, 0));
      const auto cx = static_cast<int>(rng.uniform_int(0, grid.width - 1, 0, 0, 1));
      const int y0 = std::max(0, cy - p.side / 2);
      const int x0 = std::max(0, cx - p.side / 2);
      const int y1 = std::min(grid.height, cy - p.side / 2 + p.side);
      const int x1 = std::min(grid.width, cx - p.side / 2 + p.side);
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          out.data.col(grid.pixel(y, x)).setZero();
          touched[static_cast<std::size_t>(grid.pixel(y, x))] = 1;
        }
      }
      break;
    }
    case PerturbKind::Noise: {
      const auto k = std::min<Index>(n, static_cast<Index>(std::ceil(p.rho * static_cast<double>(n) - 1e-9)));
      const int rows = p.visible_only ? 4 : grid.channels();
      for (Index pix : distinct_pixels(n, k, rng)) {
        for (int c = 0; c < rows; ++c) {
          out.data(c, pix) += static_cast<Scalar>(p.sigma * rng.normal(2, static_cast<std::uint64_t>(pix), c));
        }
        touched[static_cast<std::size_t>(pix)] = 1;
      }
      break;
    }
    case PerturbKind::Sparse: {
      for (Index pix : distinct_pixels(n, p.count, rng)) {
        out.data.col(pix).setZero();
        touched[static_cast<std::size_t>(pix)] = 1;
      }
      break;
    }
  }
  if (support) *support = std::move(touched);
  return out;
}

std::vector<double> RecoveryResult::mean_curve() const {
  std::vector<double> mean;
  int n = 0;
  for (std::size_t r = 0; r < curves.size(); ++r) {
    if (failed[r]) continue;
    if (mean.empty()) mean.assign(curves[r].size(), 0.0);
    for (std::size_t s = 0; s < mean.size(); ++s) mean[s] += curves[r][s];
    ++n;
  }
  for (double& v : mean) v /= std::max(n, 1);
  return mean;
}

template <typename Scalar>
RecoveryResult recovery_experiment(const Model<Scalar>& model, const Grid<Scalar>& state, const Grid<Scalar>& target,
                                   const Perturbation& p, int repeats, int steps, const StepOptions& opts,
                                   const RngStream& rng) {
  if (repeats < 1 || steps < 0) throw UsageError("recovery_experiment: need repeats >= 1 and steps >= 0");
  RecoveryResult res;
  res.curves.resize(static_cast<std::size_t>(repeats));
  res.failed.assign(static_cast<std::size_t>(repeats), 0);
  parallel_for(static_cast<std::size_t>(repeats), [&](std::size_t r) {
    const RngStream stream = rng.fork(static_cast<std::uint64_t>(r));
    Grid<Scalar> x = apply_perturbation(state, p, stream.fork(0));
    const RngStream dyn = stream.fork(1);
    auto& curve = res.curves[r];
    curve.push_back(rgba_mse(x, target));
    for (int s = 0; s < steps; ++s) {
      try {
        x = step(model, x, opts, dyn, static_cast<std::uint64_t>(s)).grid;
      } catch (const NumericalDivergence&) {
        res.failed[r] = 1;
        return;
      }
      const double mse = rgba_mse(x, target);
      if (!std::isfinite(mse)) {
        res.failed[r] = 1;
        return;
      }
      curve.push_back(mse);
    }
  });
  std::vector<double> finals;
  for (std::size_t r = 0; r < res.curves.size(); ++r) {
    if (!res.failed[r]) finals.push_back(res.curves[r].back());
  }
  res.completed = static_cast<int>(finals.size());
  const MeanSd ms = mean_sd(finals);
  res.final_mean = ms.mean;
  res.final_sd = ms.sd;
  res.ci95 = finals.empty() ? 0.0 : 1.96 * ms.sd / std::sqrt(static_cast<double>(finals.size()));
  return res;
}

#define MNCA_INSTANTIATE(S)                                                                                       \
  template Grid<S> apply_perturbation<S>(const Grid<S>&, const Perturbation&, const RngStream&,                  \
                                         std::vector<std::uint8_t>*);                                             \
  template RecoveryResult recovery_experiment<S>(const Model<S>&, const Grid<S>&, const Grid<S>&,                \
                                                 const Perturbation&, int, int, const StepOptions&, const RngStream&);

MNCA_INSTANTIATE(float)
MNCA_INSTANTIATE(double)

#undef MNCA_INSTANTIATE

}  // namespace mnca
