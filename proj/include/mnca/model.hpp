#pragma once

#include "mnca/rng.hpp"
#include "mnca/tensor.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <string>
#include <string_view>
#include <vector>

namespace mnca {

enum class Variant { Nca, Gca, Mnca, MncaNoise };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

inline bool is_mixture(Variant v) { return v == Variant::Mnca || v == Variant::MncaNoise; }

struct ModelShape {
  Variant variant = Variant::Nca;
  int channels = 16;
  int hidden = 128;
  int rules = 1;
  bool residual = true;
  double dropout = 0.0;
};

/// Per-pixel two-layer update network:
///   h = ReLU(w1 * perception + b1),  delta = w2 * [h; noise] + b2.
template <typename Scalar>
struct RuleNet {
  Mat<Scalar> w1;  // hidden x 3C
  Mat<Scalar> b1;  // hidden x 1
  Mat<Scalar> w2;  // outputs x (hidden + noise_dim); outputs = 2C for GCA
  Mat<Scalar> b2;  // outputs x 1
  int noise_dim = 0;

  Index hidden() const { return w1.rows(); }
  Index outputs() const { return w2.rows(); }
};

/// Rule-probability network, fed with the cell state only (no derivatives).
template <typename Scalar>
struct SelectorNet {
  Mat<Scalar> v1;  // hidden x C
  Mat<Scalar> c1;  // hidden x 1
  Mat<Scalar> v2;  // K x hidden
  Mat<Scalar> c2;  // K x 1

  Index rules() const { return v2.rows(); }
};

template <typename Scalar>
struct Model {
  ModelShape shape;
  std::vector<RuleNet<Scalar>> rules;
  std::optional<SelectorNet<Scalar>> selector;

  static Model zeros(const ModelShape& shape);
  /// Uniform(+-1/sqrt(fan_in)) init; residual models start with a zero output
  /// layer so the initial update is the identity.
  static Model initialize(const ModelShape& shape, const RngStream& rng);

  Model zeros_like() const { return zeros(shape); }

  Variant variant() const { return shape.variant; }
  int channels() const { return shape.channels; }
  int rule_count() const { return static_cast<int>(rules.size()); }

  /// Visit parameters in persistence order: per rule w1,b1,w2,b2, then the
  /// selector v1,c1,v2,c2.
  template <typename F>
  void visit(F&& f) {
    for (std::size_t k = 0; k < rules.size(); ++k) {
      const std::string p = "rule" + std::to_string(k) + ".";
      f(p + "w1", rules[k].w1);
      f(p + "b1", rules[k].b1);
      f(p + "w2", rules[k].w2);
      f(p + "b2", rules[k].b2);
    }
    if (selector) {
      f(std::string("selector.v1"), selector->v1);
      f(std::string("selector.c1"), selector->c1);
      f(std::string("selector.v2"), selector->v2);
      f(std::string("selector.c2"), selector->c2);
    }
  }

  template <typename F>
  void visit(F&& f) const {
    const_cast<Model*>(this)->visit([&](const std::string& name, Mat<Scalar>& m) { f(name, std::as_const(m)); });
  }

  std::size_t parameter_count() const;

  /// Throws ConfigError if the parameter shapes disagree with `shape`.
  void validate() const;

  template <typename Other>
  Model<Other> cast() const {
    Model<Other> out = Model<Other>::zeros(shape);
    std::vector<const Mat<Scalar>*> src;
    visit([&](const std::string&, const Mat<Scalar>& m) { src.push_back(&m); });
    std::size_t i = 0;
    out.visit([&](const std::string&, Mat<Other>& m) { m = src[i++]->template cast<Other>(); });
    return out;
  }
};

enum class SelectionMode { Sample, Argmax, Soft };

struct StepOptions {
  SelectionMode selection = SelectionMode::Sample;
  /// Optional per-rule probability multipliers (empty = no steering).
  std::vector<double> steering;
  /// Training: rule choice goes through Gumbel-Softmax (straight-through when
  /// the selection is hard).
  bool train_mode = false;
  double gumbel_temperature = 1.0;
  /// Test hook: GCA sampling with sigma forced to zero.
  bool zero_sigma = false;
};

template <typename Scalar>
struct RuleAssignment {
  std::vector<int> chosen;  // per pixel rule index; -1 under soft selection
  Mat<Scalar> probs;        // K x pixels selector output (empty for NCA/GCA)
};

template <typename Scalar>
struct StepResult {
  Grid<Scalar> grid;
  RuleAssignment<Scalar> assignment;
};

/// Everything step_backward needs from a forward step.
template <typename Scalar>
struct StepTape {
  Grid<Scalar> input;
  Mat<Scalar> perception;
  Mat<Scalar> noise;                      // 1 x pixels (noise variant only)
  std::vector<Mat<Scalar>> pre_activation;  // per rule, hidden x pixels
  std::vector<Mat<Scalar>> deltas;        // per rule, outputs x pixels
  Mat<Scalar> probs;                      // steered selector output
  Mat<Scalar> surrogate;                  // relaxed rule weights for the gradient path
  Mat<Scalar> selector_pre;               // selector hidden pre-activation
  std::vector<int> chosen;
  bool hard = true;
  double temperature = 1.0;
  Mat<Scalar> gaussian;                   // GCA reparameterization noise, C x pixels
  Mat<Scalar> sigma;                      // GCA sigma, C x pixels
  std::vector<std::uint8_t> updated;      // dropout mask, 1 = cell updated
  bool zero_sigma = false;
};

/// delta = w2 * [ReLU(w1 * features + b1); noise] + b2 per pixel.
template <typename Scalar>
Mat<Scalar> rule_delta(const RuleNet<Scalar>& rule, const Mat<Scalar>& features, const Mat<Scalar>* noise);

/// Per-pixel softmax over the selector logits, optionally rescaled by
/// `steering` multipliers and renormalized.
template <typename Scalar>
Mat<Scalar> select_probs(const SelectorNet<Scalar>& selector, const Grid<Scalar>& grid,
                         const std::vector<double>& steering = {});

/// One synchronous update of every cell. `step_index` is the RNG coordinate.
/// Records a tape for step_backward when `tape` is non-null.
template <typename Scalar>
StepResult<Scalar> step(const Model<Scalar>& model, const Grid<Scalar>& grid, const StepOptions& opts,
                        const RngStream& rng, std::uint64_t step_index, StepTape<Scalar>* tape = nullptr);

/// Returns n_steps + 1 grids, the input first. Step i uses RNG coordinate
/// first_step + i.
template <typename Scalar>
std::vector<Grid<Scalar>> rollout(const Model<Scalar>& model, const Grid<Scalar>& grid, int n_steps,
                                  const StepOptions& opts, const RngStream& rng, std::uint64_t first_step = 0);

/// Reverse pass through one recorded step. Accumulates parameter gradients
/// into `grads` (shaped like `model`) and returns d loss / d input when
/// `want_input_grad`, otherwise an empty matrix.
template <typename Scalar>
Mat<Scalar> step_backward(const Model<Scalar>& model, const StepTape<Scalar>& tape, const Mat<Scalar>& d_output,
                          Model<Scalar>& grads, bool want_input_grad);

/// Reverse pass through a recorded rollout, last tape first.
template <typename Scalar>
void rollout_backward(const Model<Scalar>& model, const std::vector<StepTape<Scalar>>& tapes,
                      const Mat<Scalar>& d_final, Model<Scalar>& grads);

/// Validates steering multipliers against the rule count.
void check_steering(const std::vector<double>& steering, int rules);

}  // namespace mnca
