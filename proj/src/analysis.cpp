#include "mnca/analysis.hpp"

#include "mnca/metrics.hpp"
#include "mnca/tissue_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mnca {

template <typename Scalar>
RuleMap rule_map(const Model<Scalar>& model, const Grid<Scalar>& grid, const std::vector<double>& steering) {
  if (!is_mixture(model.variant()) || !model.selector) throw UsageError("rule_map: model has no rule selector");
  RuleMap map;
  map.probs = select_probs(*model.selector, grid, steering).template cast<float>();
  map.height = grid.height;
  map.width = grid.width;
  map.argmax.resize(static_cast<std::size_t>(grid.pixels()));
  for (Index p = 0; p < grid.pixels(); ++p) {
    Index best = 0;
    for (Index k = 1; k < map.probs.rows(); ++k) {
      if (map.probs(k, p) > map.probs(best, p)) best = k;
    }
    map.argmax[static_cast<std::size_t>(p)] = static_cast<int>(best);
  }
  return map;
}

SpectralEstimate spectral_norm(const Eigen::MatrixXd& m, int max_iters, double tol) {
  if (m.rows() < 1 || m.cols() < 1) throw UsageError("spectral_norm: empty matrix");
  SpectralEstimate est;
  Eigen::VectorXd v(m.cols());
  const RngStream rng(0x5bd1e995u);
  for (Index i = 0; i < v.size(); ++i) v(i) = rng.normal(0, static_cast<std::uint64_t>(i), 0);
  if (v.norm() == 0.0) v.setOnes();
  v.normalize();
  double prev = -1.0;
  for (int it = 1; it <= max_iters; ++it) {
    const Eigen::VectorXd mv = m * v;
    const double sigma = mv.norm();
    est.value = sigma;
    est.iterations = it;
    est.history.push_back(sigma);
    if (sigma == 0.0) {
      est.converged = true;
      break;
    }
    if (prev >= 0.0 && std::abs(sigma - prev) <= tol * sigma) {
      est.converged = true;
      break;
    }
    prev = sigma;
    v = m.transpose() * mv;
    v.normalize();
  }
  return est;
}

double sobel_bound() { return std::sqrt(129.0); }

template <typename Scalar>
LipschitzReport lipschitz_report(const Model<Scalar>& model, const Grid<Scalar>* reference) {
  LipschitzReport rep;
  for (const auto& r : model.rules) {
    const auto a = spectral_norm(r.w1.template cast<double>());
    const auto b = spectral_norm(r.w2.template cast<double>());
    rep.converged = rep.converged && a.converged && b.converged;
    rep.rule_bounds.push_back(a.value * b.value);
  }
  const auto k = rep.rule_bounds.size();
  if (k == 1 || !model.selector) {
    rep.weights.assign(k, 1.0 / static_cast<double>(k));
  } else {
    if (!reference) throw UsageError("lipschitz_report: mixture weighting needs a reference state");
    const Mat<Scalar> probs = select_probs(*model.selector, *reference);
    for (Index r = 0; r < probs.rows(); ++r) {
      double s = 0.0;
      for (Index p = 0; p < probs.cols(); ++p) s += static_cast<double>(probs(r, p));
      rep.weights.push_back(s / static_cast<double>(probs.cols()));
    }
  }
  for (std::size_t i = 0; i < k; ++i) rep.mixture_bound += rep.weights[i] * rep.rule_bounds[i];
  rep.sobel_factor = sobel_bound();
  return rep;
}

double between_class_ss(const std::vector<NoiseSample>& samples, int classes) {
  std::vector<double> sum(static_cast<std::size_t>(classes), 0.0);
  std::vector<double> count(static_cast<std::size_t>(classes), 0.0);
  double total = 0.0;
  for (const auto& s : samples) {
    sum[static_cast<std::size_t>(s.outcome)] += s.noise;
    count[static_cast<std::size_t>(s.outcome)] += 1.0;
    total += s.noise;
  }
  const double grand = total / static_cast<double>(std::max<std::size_t>(samples.size(), 1));
  double ss = 0.0;
  for (int c = 0; c < classes; ++c) {
    if (count[c] == 0.0) continue;
    const double m = sum[c] / count[c];
    ss += count[c] * (m - grand) * (m - grand);
  }
  return ss;
}

double permutation_p_value(const std::vector<NoiseSample>& samples, int classes, int permutations,
                           const RngStream& rng) {
  const double observed = between_class_ss(samples, classes);
  std::vector<NoiseSample> shuffled = samples;
  int at_least = 0;
  for (int b = 0; b < permutations; ++b) {
    for (std::size_t i = shuffled.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(i - 1), static_cast<std::uint64_t>(b), i, 0));
      std::swap(shuffled[i - 1].outcome, shuffled[j].outcome);
    }
    if (between_class_ss(shuffled, classes) >= observed) ++at_least;
  }
  return (1.0 + at_least) / (1.0 + permutations);
}

template <typename Scalar>
NoisePartition noise_partition(const Model<Scalar>& model, const Grid<Scalar>& state, const std::vector<Index>& pixels,
                               int n_draws, int classes, const RngStream& rng, int permutations) {
  if (model.variant() != Variant::MncaNoise) throw UsageError("noise_partition: model has no intrinsic noise");
  if (n_draws < 1 || classes < 1 || classes > model.channels()) throw UsageError("noise_partition: bad draw or class count");
  for (Index p : pixels) {
    if (p < 0 || p >= state.pixels()) throw UsageError("noise_partition: pixel outside the grid");
  }
  NoisePartition out;
  out.pixels = pixels;
  out.classes = classes;
  out.samples.assign(pixels.size(), {});
  StepOptions opts;
  opts.selection = SelectionMode::Argmax;
  const RngStream dyn = rng.fork(0);
  for (int d = 0; d < n_draws; ++d) {
    const auto next = step(model, state, opts, dyn, static_cast<std::uint64_t>(d)).grid;
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      const Index p = pixels[i];
      int best = 0;
      for (int c = 1; c < classes; ++c) {
        if (next.data(c, p) > next.data(best, p)) best = c;
      }
      out.samples[i].push_back({dyn.normal(static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(p), draw_tag::kNoise), best});
    }
  }
  std::vector<NoiseSample> pooled;
  for (const auto& s : out.samples) pooled.insert(pooled.end(), s.begin(), s.end());
  out.class_frequency.assign(static_cast<std::size_t>(classes), 0.0);
  std::vector<double> noise_sum(static_cast<std::size_t>(classes), 0.0);
  for (const auto& s : pooled) {
    out.class_frequency[s.outcome] += 1.0;
    noise_sum[s.outcome] += s.noise;
  }
  out.class_noise_mean.resize(static_cast<std::size_t>(classes));
  for (int c = 0; c < classes; ++c) {
    out.class_noise_mean[c] = out.class_frequency[c] > 0.0 ? noise_sum[c] / out.class_frequency[c]
                                                            : std::numeric_limits<double>::quiet_NaN();
    out.class_frequency[c] /= static_cast<double>(pooled.size());
  }
  out.statistic = between_class_ss(pooled, classes);
  out.p_value = permutation_p_value(pooled, classes, permutations, rng.fork(1));
  return out;
}

std::vector<SweepRow> rules_sweep(const ModelShape& base, const TrainConfig& train, const TissueCohort& cohort,
                                  const std::vector<int>& rule_counts, int repeats, std::uint64_t seed) {
  if (rule_counts.empty()) throw UsageError("rules_sweep: no rule counts");
  if (repeats < 1) throw UsageError("rules_sweep: repeats must be >= 1");
  const auto sequences = encode_cohort<float>(cohort);
  const RngStream root(seed);
  std::vector<SweepRow> rows;
  for (int k : rule_counts) {
    for (int r = 0; r < repeats; ++r) {
      SweepRow row;
      row.rules = k;
      row.repeat = r;
      try {
        ModelShape shape = base;
        shape.variant = base.variant == Variant::MncaNoise ? Variant::MncaNoise : Variant::Mnca;
        shape.rules = k;
        const auto stream = root.fork(static_cast<std::uint64_t>(r));
        auto model = Model<float>::initialize(shape, stream.fork(0));
        TrainConfig cfg = train;
        cfg.seed = stream.bits(0, 0, 1);
        auto trained = train_timeseries(std::move(model), sequences, cfg);
        StepOptions opts;
        const auto generated = generate_cohort(trained.model, cohort, opts, stream.fork(2));
        row.kl = kl_proportions(cohort, generated);
      } catch (const std::exception& e) {
        row.kl = std::numeric_limits<double>::quiet_NaN();
        row.error = e.what();
      }
      rows.push_back(row);
    }
  }
  return rows;
}

#define MNCA_INSTANTIATE(S)                                                                                       \
  template RuleMap rule_map<S>(const Model<S>&, const Grid<S>&, const std::vector<double>&);                     \
  template LipschitzReport lipschitz_report<S>(const Model<S>&, const Grid<S>*);                                 \
  template NoisePartition noise_partition<S>(const Model<S>&, const Grid<S>&, const std::vector<Index>&, int, int, \
                                             const RngStream&, int);

MNCA_INSTANTIATE(float)
MNCA_INSTANTIATE(double)

#undef MNCA_INSTANTIATE

}  // namespace mnca
