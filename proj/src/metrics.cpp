#include "mnca/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mnca {

std::array<double, kCellTypes> type_proportions(const TissueCohort& cohort) {
  std::array<double, kCellTypes> counts{};
  double total = 0.0;
  for (const auto& traj : cohort.realizations) {
    for (std::uint8_t c : traj.back().cells) {
      if (c == EMPTY) continue;
      counts[type_index(c)] += 1.0;
      total += 1.0;
    }
  }
  if (total > 0.0) {
    for (double& c : counts) c /= total;
  }
  return counts;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) throw UsageError("kl_divergence: size mismatch");
  constexpr double kSmooth = 1e-9;
  double p_total = 0.0;
  double q_total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p_total += p[i];
    q_total += q[i] + kSmooth;
  }
  if (!(p_total > 0.0)) throw UsageError("kl_divergence: reference distribution is empty");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = p[i] / p_total;
    if (pi <= 0.0) continue;
    const double qi = (q[i] + kSmooth) / q_total;
    kl += pi * std::log(pi / qi);
  }
  return kl;
}

double kl_proportions(const TissueCohort& real, const TissueCohort& generated) {
  if (real.realizations.empty() || generated.realizations.empty()) throw UsageError("kl_proportions: empty cohort");
  const auto p = type_proportions(real);
  const auto q = type_proportions(generated);
  return kl_divergence(p, q);
}

double wasserstein1(std::span<const double> u, std::span<const double> v) {
  if (u.empty() || v.empty()) throw UsageError("wasserstein1: empty sample");
  std::vector<double> a(u.begin(), u.end());
  std::vector<double> b(v.begin(), v.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double x = std::min(a.front(), b.front());
  double total = 0.0;
  while (i < a.size() || j < b.size()) {
    double next;
    if (j >= b.size() || (i < a.size() && a[i] <= b[j])) {
      next = a[i];
    } else {
      next = b[j];
    }
    // F_U and F_V are constant on [x, next).
    total += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - x);
    x = next;
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
  }
  return total;
}

int tissue_size(const CellGrid& grid) {
  return static_cast<int>(std::count_if(grid.cells.begin(), grid.cells.end(), [](std::uint8_t c) { return c != EMPTY; }));
}

int border_complexity(const CellGrid& grid, double threshold) {
  const int n = grid.size;
  int count = 0;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      int neighbors = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dy == 0 && dx == 0) continue;
          const int yy = y + dy;
          const int xx = x + dx;
          if (yy >= 0 && yy < n && xx >= 0 && xx < n && grid.at(yy, xx) != EMPTY) ++neighbors;
        }
      }
      const double centre = grid.at(y, x) != EMPTY ? 1.0 : 0.0;
      const double lap = centre - static_cast<double>(neighbors) / 8.0;
      if (std::abs(lap) > threshold) ++count;
    }
  }
  return count;
}

MetricReport evaluate_cohorts(const TissueCohort& real, const TissueCohort& generated) {
  if (real.realizations.empty() || generated.realizations.empty()) throw UsageError("evaluate_cohorts: empty cohort");
  auto collect = [](const TissueCohort& c, auto f) {
    std::vector<double> out;
    out.reserve(c.realizations.size());
    for (const auto& traj : c.realizations) out.push_back(static_cast<double>(f(traj.back())));
    return out;
  };
  const auto size_of = [](const CellGrid& g) { return tissue_size(g); };
  const auto border_of = [](const CellGrid& g) { return border_complexity(g); };
  MetricReport r;
  r.kl_div = kl_proportions(real, generated);
  r.size_w = wasserstein1(collect(real, size_of), collect(generated, size_of));
  r.border_w = wasserstein1(collect(real, border_of), collect(generated, border_of));
  return r;
}

template <typename Scalar>
double rgba_mse(const Grid<Scalar>& grid, const Grid<Scalar>& target) {
  if (grid.channels() < 4 || target.channels() < 4 || grid.height != target.height || grid.width != target.width) {
    throw UsageError("rgba_mse: shape mismatch");
  }
  double acc = 0.0;
  for (int c = 0; c < 4; ++c) {
    for (Index p = 0; p < grid.pixels(); ++p) {
      const double d = static_cast<double>(grid.data(c, p)) - static_cast<double>(target.data(c, p));
      acc += d * d;
    }
  }
  return acc / (4.0 * static_cast<double>(grid.pixels()));
}

template double rgba_mse<float>(const Grid<float>&, const Grid<float>&);
template double rgba_mse<double>(const Grid<double>&, const Grid<double>&);

MeanSd mean_sd(std::span<const double> values) {
  MeanSd r;
  if (values.empty()) return r;
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return r;
}

}  // namespace mnca
