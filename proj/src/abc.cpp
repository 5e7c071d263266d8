#include "mnca/abc.hpp"

#include "mnca/metrics.hpp"
#include "mnca/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mnca {

void PriorSpec::validate() const {
  for (const GammaPrior* g : {&b, &d, &s, &D}) {
    if (!(g->shape > 0.0) || !(g->param > 0.0)) throw ConfigError("gamma prior shape and scale must be positive");
  }
  if (!(I_sd >= 0.0)) throw ConfigError("interaction prior sd must be >= 0");
}

double sample_gamma(double shape, double scale, const RngStream& rng, std::uint64_t step, std::uint64_t cell) {
  if (!(shape > 0.0) || !(scale > 0.0)) throw UsageError("sample_gamma: shape and scale must be positive");
  if (shape == 1.0) return -scale * std::log(rng.uniform(step, cell, 0));
  double boost = 1.0;
  double a = shape;
  std::uint64_t draw = 0;
  if (a < 1.0) {
    boost = std::pow(rng.uniform(step, cell, draw++), 1.0 / a);
    a += 1.0;
  }
  const double d = a - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    const double x = rng.normal(step, cell, draw++);
    const double v = std::pow(1.0 + c * x, 3);
    if (v <= 0.0) continue;
    const double u = rng.uniform(step, cell, draw++);
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return boost * d * v * scale;
  }
}

SimParams sample_prior(const PriorSpec& spec, const SimParams& base, const RngStream& rng) {
  spec.validate();
  SimParams p = base;
  std::uint64_t cell = 0;
  auto gamma = [&](const GammaPrior& g) {
    const double scale = spec.reading == GammaReading::Scale ? g.param : 1.0 / g.param;
    return sample_gamma(g.shape, scale, rng, 0, cell++);
  };
  for (int i = 0; i < kCellTypes; ++i) p.b[i] = gamma(spec.b);
  for (int i = 0; i < kCellTypes; ++i) p.d[i] = gamma(spec.d);
  for (int i = 0; i < kCellTypes; ++i) p.s[i] = gamma(spec.s);
  for (auto& row : p.D) {
    for (double& v : row) v = gamma(spec.D);
  }
  for (auto& row : p.I) {
    for (double& v : row) v = spec.I_mean + spec.I_sd * rng.normal(1, cell++, 0);
  }
  return p;
}

SummaryKind parse_summary_kind(std::string_view name) {
  if (name == "proportions") return SummaryKind::Proportions;
  if (name == "neighborhood") return SummaryKind::Neighborhood;
  if (name == "correlation") return SummaryKind::Correlation;
  throw ConfigError("unknown summary statistic '" + std::string(name) +
                    "' (expected proportions, neighborhood or correlation)");
}

std::string_view to_string(SummaryKind kind) {
  switch (kind) {
    case SummaryKind::Proportions: return "proportions";
    case SummaryKind::Neighborhood: return "neighborhood";
    case SummaryKind::Correlation: return "correlation";
  }
  return "unknown";
}

Summary summary_proportions(const TissueCohort& cohort) {
  Summary s;
  s.kind = SummaryKind::Proportions;
  double total = 0.0;
  for (const auto& traj : cohort.realizations) {
    for (std::uint8_t c : traj.back().cells) {
      s.proportions[c] += 1.0;
      total += 1.0;
    }
  }
  if (total > 0.0) {
    for (double& v : s.proportions) v /= total;
  }
  return s;
}

Summary summary_neighborhood(const TissueCohort& cohort) {
  Summary s;
  s.kind = SummaryKind::Neighborhood;
  for (const auto& traj : cohort.realizations) {
    const CellGrid& g = traj.back();
    const int n = g.size;
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        std::array<int, kCellLabels> counts{};
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = y + dy;
            const int xx = x + dx;
            const bool inside = yy >= 0 && yy < n && xx >= 0 && xx < n;
            ++counts[inside ? g.at(yy, xx) : std::uint8_t{EMPTY}];
          }
        }
        for (int c = 0; c < kCellLabels; ++c) s.neighborhood[c].push_back(counts[c] / 9.0);
      }
    }
  }
  return s;
}

Summary summary_correlation(const TissueCohort& cohort) {
  Summary s;
  s.kind = SummaryKind::Correlation;
  std::array<double, kCellTypes> sum{};
  Eigen::Matrix<double, kCellTypes, kCellTypes> cross = Eigen::Matrix<double, kCellTypes, kCellTypes>::Zero();
  double n = 0.0;
  for (const auto& traj : cohort.realizations) {
    for (std::uint8_t c : traj.back().cells) {
      n += 1.0;
      if (c == EMPTY) continue;
      const int i = type_index(c);
      sum[i] += 1.0;
      // Masks are one-hot per site, so only the diagonal gets co-occurrences.
      cross(i, i) += 1.0;
    }
  }
  if (n == 0.0) return s;
  for (int i = 0; i < kCellTypes; ++i) {
    for (int j = 0; j < kCellTypes; ++j) {
      const double mi = sum[i] / n;
      const double mj = sum[j] / n;
      const double cov = cross(i, j) / n - mi * mj;
      const double vi = mi - mi * mi;
      const double vj = mj - mj * mj;
      s.correlation(i, j) = (vi > 0.0 && vj > 0.0) ? cov / std::sqrt(vi * vj) : 0.0;
    }
  }
  return s;
}

Summary summarize(const TissueCohort& cohort, SummaryKind kind) {
  switch (kind) {
    case SummaryKind::Proportions: return summary_proportions(cohort);
    case SummaryKind::Neighborhood: return summary_neighborhood(cohort);
    case SummaryKind::Correlation: return summary_correlation(cohort);
  }
  throw UsageError("summarize: unknown kind");
}

double abc_distance(const Summary& a, const Summary& b) {
  if (a.kind != b.kind) throw UsageError("abc_distance: summary statistics of different kinds");
  switch (a.kind) {
    case SummaryKind::Proportions: {
      double l1 = 0.0;
      for (int c = 0; c < kCellLabels; ++c) l1 += std::abs(a.proportions[c] - b.proportions[c]);
      return 0.5 * l1;
    }
    case SummaryKind::Neighborhood: {
      double total = 0.0;
      for (int c = 0; c < kCellLabels; ++c) total += wasserstein1(a.neighborhood[c], b.neighborhood[c]);
      return total / kCellLabels;
    }
    case SummaryKind::Correlation:
      return (a.correlation - b.correlation).norm() / std::numbers::sqrt2;
  }
  throw UsageError("abc_distance: unknown kind");
}

std::vector<double> flatten(const SimParams& p) {
  std::vector<double> v;
  v.insert(v.end(), p.b.begin(), p.b.end());
  v.insert(v.end(), p.d.begin(), p.d.end());
  v.insert(v.end(), p.s.begin(), p.s.end());
  for (const auto& row : p.D) v.insert(v.end(), row.begin(), row.end());
  for (const auto& row : p.I) v.insert(v.end(), row.begin(), row.end());
  return v;
}

std::vector<std::string> flat_names() {
  std::vector<std::string> names;
  for (const char* vec : {"b", "d", "s"}) {
    for (int i = 0; i < kCellTypes; ++i) names.push_back(std::string(vec) + "_" + std::string(cell_type_name(i + 1)));
  }
  for (const char* mat : {"D", "I"}) {
    for (int i = 0; i < kCellTypes; ++i) {
      for (int j = 0; j < kCellTypes; ++j) {
        names.push_back(std::string(mat) + "_" + std::string(cell_type_name(i + 1)) + "_" +
                        std::string(cell_type_name(j + 1)));
      }
    }
  }
  return names;
}

namespace {

SimParams unflatten(const std::vector<double>& v, const SimParams& base) {
  SimParams p = base;
  std::size_t k = 0;
  for (double& x : p.b) x = v[k++];
  for (double& x : p.d) x = v[k++];
  for (double& x : p.s) x = v[k++];
  for (auto& row : p.D) {
    for (double& x : row) x = v[k++];
  }
  for (auto& row : p.I) {
    for (double& x : row) x = v[k++];
  }
  return p;
}

}  // namespace

AbcResult abc_run(const TissueCohort& observed, const PriorSpec& spec, const SimParams& base, const AbcOptions& opts,
                  const RngStream& rng) {
  if (opts.particles < 1) throw UsageError("abc_run: need at least one particle");
  if (opts.realizations_per_particle < 1) throw UsageError("abc_run: need at least one realization per particle");
  if (opts.quantile > 0.0) {
    if (opts.quantile > 1.0) throw UsageError("abc_run: quantile must lie in (0, 1]");
  } else if (!(opts.epsilon > 0.0)) {
    throw UsageError("abc_run: epsilon must be positive");
  }
  if (observed.realizations.empty()) throw UsageError("abc_run: empty observed cohort");
  spec.validate();

  const Summary target = summarize(observed, opts.kind);
  AbcResult result;
  result.particles.resize(static_cast<std::size_t>(opts.particles));
  parallel_for(result.particles.size(), [&](std::size_t i) {
    const RngStream stream = rng.fork(static_cast<std::uint64_t>(i));
    Particle& p = result.particles[i];
    p.params = sample_prior(spec, base, stream.fork(0));
    const TissueCohort sim = run_cohort(p.params, opts.realizations_per_particle, stream.fork(1));
    p.distance = abc_distance(summarize(sim, opts.kind), target);
  });

  std::vector<double> distances;
  distances.reserve(result.particles.size());
  for (const auto& p : result.particles) distances.push_back(p.distance);
  result.min_distance = *std::min_element(distances.begin(), distances.end());
  if (opts.quantile > 0.0) {
    std::vector<double> sorted = distances;
    std::sort(sorted.begin(), sorted.end());
    const double pos = opts.quantile * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double q = sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    // Strict acceptance would drop the quantile point itself at q = 1.
    result.epsilon = opts.quantile >= 1.0 ? std::numeric_limits<double>::infinity() : q;
  } else {
    result.epsilon = opts.epsilon;
  }

  double total_weight = 0.0;
  std::size_t accepted = 0;
  for (auto& p : result.particles) {
    p.accepted = p.distance < result.epsilon;
    if (!p.accepted) continue;
    p.weight = 1.0 / std::max(p.distance, 1e-12);
    total_weight += p.weight;
    ++accepted;
  }
  if (accepted == 0) {
    throw UsageError("abc_run: no particle accepted (epsilon " + std::to_string(result.epsilon) +
                     ", smallest distance " + std::to_string(result.min_distance) + ")");
  }
  std::vector<double> mean(flatten(base).size(), 0.0);
  for (auto& p : result.particles) {
    if (!p.accepted) continue;
    p.weight /= total_weight;
    const auto flat = flatten(p.params);
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += p.weight * flat[k];
  }
  result.posterior = unflatten(mean, base);
  result.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(result.particles.size());
  return result;
}

}  // namespace mnca
