#pragma once

#include "mnca/abc.hpp"
#include "mnca/model.hpp"
#include "mnca/perturb.hpp"
#include "mnca/tissue.hpp"
#include "mnca/tissue_model.hpp"
#include "mnca/training.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace mnca {

enum class Task { Tissue, Image };

struct TissueBlock {
  std::string params = "default";  // default | minimal
  int size = 35;
  int steps = 35;
  int realizations = 200;
  int stem_min = 5;
  int stem_max = 15;
  InteractionMode interaction = InteractionMode::NeighborRows;
  int window = 8;
  int tau = 1;
  int samples = 8;
  Discretize discretize = Discretize::Argmax;
  std::string cohort;  // optional path to a saved cohort; generated when empty
  int eval_repeats = 5;  // generated cohorts per model in evaluate

  SimParams sim_params() const;
};

struct ImageBlock {
  std::string target = "procedural";  // PNG path or "procedural"
  int target_size = 40;
  int pad = 6;
  double pad_value = 0.0;
  int pool_size = 1000;
  int batch_size = 8;
  int n_min = 30;
  int n_max = 50;
  int seed_y = -1;
  int seed_x = -1;
  int grow_steps = 100;  // rollout length used to reach a converged state
};

struct AbcBlock {
  int particles = 500;
  SummaryKind statistic = SummaryKind::Proportions;
  double epsilon = 0.0;   // used when quantile is 0
  double quantile = 0.1;
  int realizations_per_particle = 1;
  int observed_realizations = 50;
  int posterior_realizations = 50;
  PriorSpec prior;
};

struct PerturbBlock {
  std::vector<Perturbation> perturbations;
  int repeats = 50;
  int steps = 100;
};

struct SweepBlock {
  std::vector<int> rule_counts{1, 2, 3, 4, 5, 6};
  int repeats = 3;
};

struct AnalyzeBlock {
  int noise_draws = 1000;
  int permutations = 2000;
  std::vector<int> pixels;  // flattened pixel indices; empty = automatic
  int state_steps = 25;     // rollout length used for the reference state
};

struct SteerBlock {
  std::vector<double> multipliers;
  int steps = 50;
};

struct ExperimentConfig {
  ModelShape model;
  double learning_rate = 1e-3;
  int epochs = 800;
  std::vector<int> milestones;
  double gamma = 0.1;
  std::vector<std::string> filters{"grad_x", "grad_y"};
  std::uint64_t seed = 0;
  bool seed_given = false;
  double grad_eps = 1e-8;
  double gumbel_temperature = 1.0;
  Task task = Task::Tissue;

  TissueBlock tissue;
  ImageBlock image;
  AbcBlock abc;
  PerturbBlock perturb;
  SweepBlock sweep;
  AnalyzeBlock analyze;
  SteerBlock steer;

  TrainConfig train_config() const;
  void validate() const;
};

/// Parses and validates a YAML config; errors name the field and line.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& source = "<config>");

/// Canonical JSON form (every field, defaults included).
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// FNV-1a 64 of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace mnca
