#pragma once

#include "mnca/rng.hpp"
#include "mnca/tissue.hpp"

#include <Eigen/Dense>

#include <array>
#include <limits>
#include <vector>

namespace mnca {

enum class GammaReading { Scale, Rate };

struct GammaPrior {
  double shape = 1.0;
  double param = 0.1;  // scale or rate depending on PriorSpec::reading
};

struct PriorSpec {
  GammaPrior b{1.0, 0.1};
  GammaPrior d{1.0, 0.01};
  GammaPrior s{1.0, 0.1};
  GammaPrior D{1.0, 0.1};
  double I_mean = 0.0;
  double I_sd = 1.0;
  GammaReading reading = GammaReading::Scale;

  void validate() const;
};

/// Gamma draw via Marsaglia-Tsang; `scale` is the mean / shape.
double sample_gamma(double shape, double scale, const RngStream& rng, std::uint64_t step, std::uint64_t cell);

/// Draws rates and matrices from the prior; grid size, steps, stem range and
/// interaction mode are copied from `base`.
SimParams sample_prior(const PriorSpec& spec, const SimParams& base, const RngStream& rng);

enum class SummaryKind { Proportions, Neighborhood, Correlation };

SummaryKind parse_summary_kind(std::string_view name);
std::string_view to_string(SummaryKind kind);

struct Summary {
  SummaryKind kind = SummaryKind::Proportions;
  std::array<double, kCellLabels> proportions{};
  std::array<std::vector<double>, kCellLabels> neighborhood;  // per-type sample sets
  Eigen::Matrix<double, kCellTypes, kCellTypes> correlation = Eigen::Matrix<double, kCellTypes, kCellTypes>::Zero();
};

/// Final-step label frequencies including EMPTY.
Summary summary_proportions(const TissueCohort& cohort);
/// Per site, the label composition of its zero-padded 3x3 neighbourhood
/// (padding counts as EMPTY), kept as one sample set per label.
Summary summary_neighborhood(const TissueCohort& cohort);
/// Pearson correlation between the binary masks of the five occupied types;
/// entries involving a constant mask are 0.
Summary summary_correlation(const TissueCohort& cohort);

Summary summarize(const TissueCohort& cohort, SummaryKind kind);

/// Proportions: half the L1 distance. Neighbourhood: mean of the per-label
/// W1 distances. Correlation: Frobenius norm of the difference over sqrt(2).
double abc_distance(const Summary& a, const Summary& b);

struct Particle {
  SimParams params;
  double distance = 0.0;
  bool accepted = false;
  double weight = 0.0;
};

struct AbcOptions {
  int particles = 500;
  SummaryKind kind = SummaryKind::Proportions;
  /// Absolute threshold; ignored when quantile is set.
  double epsilon = std::numeric_limits<double>::infinity();
  /// When in (0, 1], epsilon is this quantile of the particle distances.
  double quantile = 0.0;
  int realizations_per_particle = 1;
};

struct AbcResult {
  std::vector<Particle> particles;
  SimParams posterior;
  double epsilon = 0.0;
  double acceptance_rate = 0.0;
  double min_distance = 0.0;
};

/// Rejection ABC: particle i is simulated with rng.fork(i); accepted iff
/// distance < epsilon; the posterior is the 1/distance weighted mean of
/// the accepted parameters.
AbcResult abc_run(const TissueCohort& observed, const PriorSpec& spec, const SimParams& base, const AbcOptions& opts,
                  const RngStream& rng);

/// Flat parameter vector in the particle CSV column order: b, d, s, D
/// row-major, I row-major.
std::vector<double> flatten(const SimParams& p);
std::vector<std::string> flat_names();

}  // namespace mnca
