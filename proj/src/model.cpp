#include "mnca/model.hpp"

#include "mnca/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mnca {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Nca: return "nca";
    case Variant::Gca: return "gca";
    case Variant::Mnca: return "mnca";
    case Variant::MncaNoise: return "mnca_noise";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  if (name == "nca") return Variant::Nca;
  if (name == "gca") return Variant::Gca;
  if (name == "mnca") return Variant::Mnca;
  if (name == "mnca_noise") return Variant::MncaNoise;
  throw ConfigError("unknown model variant '" + std::string(name) + "' (expected nca, gca, mnca or mnca_noise)");
}

void check_steering(const std::vector<double>& steering, int rules) {
  if (steering.empty()) return;
  if (static_cast<int>(steering.size()) != rules) {
    throw UsageError("steering has " + std::to_string(steering.size()) + " multipliers for " + std::to_string(rules) +
                     " rules");
  }
  bool any = false;
  for (double m : steering) {
    if (!(m >= 0.0) || !std::isfinite(m)) throw UsageError("steering multipliers must be finite and nonnegative");
    any = any || m > 0.0;
  }
  if (!any) throw UsageError("steering multipliers are all zero");
}

template <typename Scalar>
Model<Scalar> Model<Scalar>::zeros(const ModelShape& shape) {
  if (shape.channels < 1 || shape.hidden < 1) throw ConfigError("model needs channels >= 1 and hidden >= 1");
  const bool mixture = is_mixture(shape.variant);
  const int k = mixture ? shape.rules : 1;
  if (k < 1) throw ConfigError("number of rules must be >= 1");
  if (!mixture && shape.rules != 1) throw ConfigError(std::string(to_string(shape.variant)) + " models have exactly one rule");
  if (!(shape.dropout >= 0.0 && shape.dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");

  Model m;
  m.shape = shape;
  const int c = shape.channels;
  const int noise = shape.variant == Variant::MncaNoise ? 1 : 0;
  const int outputs = shape.variant == Variant::Gca ? 2 * c : c;
  m.rules.resize(static_cast<std::size_t>(k));
  for (auto& r : m.rules) {
    r.w1 = Mat<Scalar>::Zero(shape.hidden, 3 * c);
    r.b1 = Mat<Scalar>::Zero(shape.hidden, 1);
    r.w2 = Mat<Scalar>::Zero(outputs, shape.hidden + noise);
    r.b2 = Mat<Scalar>::Zero(outputs, 1);
    r.noise_dim = noise;
  }
  if (mixture) {
    SelectorNet<Scalar> s;
    s.v1 = Mat<Scalar>::Zero(shape.hidden, c);
    s.c1 = Mat<Scalar>::Zero(shape.hidden, 1);
    s.v2 = Mat<Scalar>::Zero(k, shape.hidden);
    s.c2 = Mat<Scalar>::Zero(k, 1);
    m.selector = std::move(s);
  }
  return m;
}

template <typename Scalar>
Model<Scalar> Model<Scalar>::initialize(const ModelShape& shape, const RngStream& rng) {
  Model m = zeros(shape);
  std::uint64_t tensor_id = 0;
  auto fill = [&](Mat<Scalar>& t, Index fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Index i = 0; i < t.size(); ++i) {
      t.data()[i] = static_cast<Scalar>((2.0 * rng.uniform(tensor_id, static_cast<std::uint64_t>(i), 0) - 1.0) * bound);
    }
    ++tensor_id;
  };
  for (auto& r : m.rules) {
    fill(r.w1, r.w1.cols());
    fill(r.b1, r.w1.cols());
    if (shape.residual) {
      tensor_id += 2;
    } else {
      fill(r.w2, r.w2.cols());
      fill(r.b2, r.w2.cols());
    }
    if (shape.variant == Variant::Gca) r.b2.bottomRows(shape.channels).setConstant(Scalar(-4));
  }
  if (m.selector) {
    fill(m.selector->v1, m.selector->v1.cols());
    fill(m.selector->c1, m.selector->v1.cols());
    fill(m.selector->v2, m.selector->v2.cols());
    fill(m.selector->c2, m.selector->v2.cols());
  }
  return m;
}

template <typename Scalar>
std::size_t Model<Scalar>::parameter_count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const Mat<Scalar>& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

template <typename Scalar>
void Model<Scalar>::validate() const {
  const Model reference = zeros(shape);
  std::vector<std::pair<Index, Index>> expected;
  reference.visit([&](const std::string&, const Mat<Scalar>& m) { expected.emplace_back(m.rows(), m.cols()); });
  std::size_t i = 0;
  visit([&](const std::string& name, const Mat<Scalar>& m) {
    if (i >= expected.size() || expected[i] != std::make_pair(m.rows(), m.cols())) {
      throw ConfigError("parameter " + name + " has shape " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                        " inconsistent with the model configuration");
    }
    ++i;
  });
  if (i != expected.size()) throw ConfigError("parameter inventory does not match the model configuration");
}

namespace {

template <typename Scalar>
struct SelectorForward {
  Mat<Scalar> pre;
  Mat<Scalar> probs;
};

template <typename Scalar>
SelectorForward<Scalar> selector_forward(const SelectorNet<Scalar>& sel, const Mat<Scalar>& state,
                                         const std::vector<double>& steering) {
  SelectorForward<Scalar> f;
  f.pre = dense_per_pixel(state, sel.v1, sel.c1);
  const Mat<Scalar> hidden = f.pre.cwiseMax(Scalar(0));
  const Mat<Scalar> logits = dense_per_pixel(hidden, sel.v2, sel.c2);
  const Index k = logits.rows();
  const Index n = logits.cols();
  check_steering(steering, static_cast<int>(k));
  f.probs.resize(k, n);
  for (Index p = 0; p < n; ++p) {
    Scalar mx = logits(0, p);
    for (Index r = 1; r < k; ++r) mx = std::max(mx, logits(r, p));
    Scalar total = 0;
    for (Index r = 0; r < k; ++r) {
      Scalar e = std::exp(logits(r, p) - mx);
      if (!steering.empty()) e *= static_cast<Scalar>(steering[static_cast<std::size_t>(r)]);
      f.probs(r, p) = e;
      total += e;
    }
    if (!(total > Scalar(0)) || !std::isfinite(total)) {
      throw UsageError("select_probs: steered probabilities are all zero at pixel " + std::to_string(p));
    }
    for (Index r = 0; r < k; ++r) f.probs(r, p) /= total;
  }
  return f;
}

template <typename Scalar>
Mat<Scalar> hidden_with_noise(const Mat<Scalar>& pre, const Mat<Scalar>* noise) {
  if (!noise || noise->size() == 0) return pre.cwiseMax(Scalar(0));
  Mat<Scalar> h(pre.rows() + 1, pre.cols());
  h.topRows(pre.rows()) = pre.cwiseMax(Scalar(0));
  h.bottomRows(1) = *noise;
  return h;
}

template <typename Scalar>
void rule_forward(const RuleNet<Scalar>& rule, const Mat<Scalar>& features, const Mat<Scalar>* noise,
                  Mat<Scalar>& pre, Mat<Scalar>& delta) {
  dense_per_pixel_into(features, rule.w1, rule.b1, pre);
  const Mat<Scalar> h = hidden_with_noise(pre, noise);
  dense_per_pixel_into(h, rule.w2, rule.b2, delta);
}

template <typename Scalar>
Index argmax_col(const Mat<Scalar>& m, Index p) {
  Index best = 0;
  for (Index r = 1; r < m.rows(); ++r) {
    if (m(r, p) > m(best, p)) best = r;
  }
  return best;
}

}  // namespace

template <typename Scalar>
Mat<Scalar> rule_delta(const RuleNet<Scalar>& rule, const Mat<Scalar>& features, const Mat<Scalar>* noise) {
  const bool has_noise = noise != nullptr && noise->size() > 0;
  if (has_noise != (rule.noise_dim == 1)) {
    throw UsageError(rule.noise_dim == 1 ? "rule_delta: this rule expects a noise channel"
                                         : "rule_delta: this rule takes no noise channel");
  }
  if (has_noise && (noise->rows() != 1 || noise->cols() != features.cols())) {
    throw UsageError("rule_delta: noise must be 1 x pixels");
  }
  Mat<Scalar> pre, delta;
  rule_forward(rule, features, noise, pre, delta);
  return delta;
}

template <typename Scalar>
Mat<Scalar> select_probs(const SelectorNet<Scalar>& selector, const Grid<Scalar>& grid,
                         const std::vector<double>& steering) {
  if (grid.channels() != selector.v1.cols()) {
    throw UsageError("select_probs: grid has " + std::to_string(grid.channels()) + " channels, selector expects " +
                     std::to_string(selector.v1.cols()));
  }
  return selector_forward(selector, grid.data, steering).probs;
}

template <typename Scalar>
StepResult<Scalar> step(const Model<Scalar>& model, const Grid<Scalar>& grid, const StepOptions& opts,
                        const RngStream& rng, std::uint64_t t, StepTape<Scalar>* tape) {
  const int c = model.channels();
  if (grid.channels() != c) {
    throw UsageError("step: grid has " + std::to_string(grid.channels()) + " channels, model expects " +
                     std::to_string(c));
  }
  const Index n = grid.pixels();
  const Variant variant = model.variant();
  const bool mixture = is_mixture(variant);
  const int k_rules = model.rule_count();

  Mat<Scalar> perception = sobel_perceive(grid);
  Mat<Scalar> noise;
  if (variant == Variant::MncaNoise) {
    noise.resize(1, n);
    for (Index p = 0; p < n; ++p) noise(0, p) = static_cast<Scalar>(rng.normal(t, static_cast<std::uint64_t>(p), draw_tag::kNoise));
  }
  const Mat<Scalar>* noise_ptr = noise.size() ? &noise : nullptr;

  // Rule selection.
  std::vector<int> chosen(static_cast<std::size_t>(n), 0);
  bool hard = true;
  Mat<Scalar> probs, surrogate, selector_pre;
  const double temperature = opts.train_mode ? opts.gumbel_temperature : 1.0;
  if (mixture) {
    if (!model.selector) throw ConfigError("mixture model without a selector network");
    if (!(temperature > 0.0)) throw UsageError("gumbel temperature must be positive");
    auto sf = selector_forward(*model.selector, grid.data, opts.steering);
    probs = std::move(sf.probs);
    selector_pre = std::move(sf.pre);
    if (opts.train_mode) {
      surrogate.resize(k_rules, n);
      std::vector<double> z(static_cast<std::size_t>(k_rules));
      for (Index p = 0; p < n; ++p) {
        double zmax = -std::numeric_limits<double>::infinity();
        for (int r = 0; r < k_rules; ++r) {
          const double pr = static_cast<double>(probs(r, p));
          const double g = gumbel_from_uniform(
              rng.uniform(t, static_cast<std::uint64_t>(p), draw_tag::kGumbel + static_cast<std::uint64_t>(r)));
          z[r] = pr > 0.0 ? (std::log(pr) + g) / temperature : -std::numeric_limits<double>::infinity();
          zmax = std::max(zmax, z[r]);
        }
        double total = 0.0;
        for (int r = 0; r < k_rules; ++r) {
          z[r] = std::exp(z[r] - zmax);
          total += z[r];
        }
        for (int r = 0; r < k_rules; ++r) surrogate(r, p) = static_cast<Scalar>(z[r] / total);
      }
    } else {
      surrogate = probs;
    }
    switch (opts.selection) {
      case SelectionMode::Soft:
        hard = false;
        std::fill(chosen.begin(), chosen.end(), -1);
        break;
      case SelectionMode::Argmax:
        for (Index p = 0; p < n; ++p) chosen[p] = static_cast<int>(argmax_col(probs, p));
        break;
      case SelectionMode::Sample:
        if (opts.train_mode) {
          for (Index p = 0; p < n; ++p) chosen[p] = static_cast<int>(argmax_col(surrogate, p));
        } else {
          std::vector<double> col(static_cast<std::size_t>(k_rules));
          for (Index p = 0; p < n; ++p) {
            double total = 0.0;
            for (int r = 0; r < k_rules; ++r) total += col[r] = static_cast<double>(probs(r, p));
            for (auto& v : col) v /= total;
            chosen[p] = static_cast<int>(rng.categorical(col, t, static_cast<std::uint64_t>(p), draw_tag::kCategorical));
          }
        }
        break;
    }
  }

  // Rule outputs.
  const Index outputs = model.rules.front().outputs();
  Mat<Scalar> update(outputs, n);
  std::vector<Mat<Scalar>> pre(static_cast<std::size_t>(k_rules)), deltas(static_cast<std::size_t>(k_rules));
  if (tape != nullptr || !hard) {
    for (int r = 0; r < k_rules; ++r) rule_forward(model.rules[r], perception, noise_ptr, pre[r], deltas[r]);
    if (hard) {
      for (Index p = 0; p < n; ++p) update.col(p) = deltas[chosen[p]].col(p);
    } else {
      update.setZero();
      for (int r = 0; r < k_rules; ++r) {
        update.array() += deltas[r].array().rowwise() * surrogate.row(r).array();
      }
    }
  } else {
    std::vector<std::vector<Index>> groups(static_cast<std::size_t>(k_rules));
    for (Index p = 0; p < n; ++p) groups[chosen[p]].push_back(p);
    for (int r = 0; r < k_rules; ++r) {
      const auto& idx = groups[r];
      if (idx.empty()) continue;
      Mat<Scalar> rule_pre, rule_out;
      if (static_cast<Index>(idx.size()) == n) {
        rule_forward(model.rules[r], perception, noise_ptr, rule_pre, update);
      } else {
        const Mat<Scalar> feats = perception(Eigen::all, idx);
        Mat<Scalar> sub_noise;
        if (noise_ptr) sub_noise = noise(Eigen::all, idx);
        rule_forward(model.rules[r], feats, noise_ptr ? &sub_noise : nullptr, rule_pre, rule_out);
        update(Eigen::all, idx) = rule_out;
      }
    }
  }

  Mat<Scalar> gaussian, sigma;
  Mat<Scalar> delta_state;
  if (variant == Variant::Gca) {
    sigma = (update.bottomRows(c).array() * Scalar(0.5)).exp().matrix();
    if (opts.zero_sigma) {
      delta_state = update.topRows(c);
    } else {
      gaussian.resize(c, n);
      for (int ch = 0; ch < c; ++ch) {
        for (Index p = 0; p < n; ++p) {
          gaussian(ch, p) = static_cast<Scalar>(
              rng.normal(t, static_cast<std::uint64_t>(p), draw_tag::kGaussian + static_cast<std::uint64_t>(ch)));
        }
      }
      delta_state = update.topRows(c) + (sigma.array() * gaussian.array()).matrix();
    }
  } else {
    delta_state = std::move(update);
  }

  std::vector<std::uint8_t> updated(static_cast<std::size_t>(n), 1);
  const double dropout = model.shape.dropout;
  if (dropout > 0.0) {
    for (Index p = 0; p < n; ++p) {
      updated[p] = rng.uniform(t, static_cast<std::uint64_t>(p), draw_tag::kDropout) >= dropout ? 1 : 0;
    }
  }

  StepResult<Scalar> result;
  result.grid = grid;
  auto& out = result.grid.data;
  if (dropout > 0.0) {
    for (Index p = 0; p < n; ++p) {
      if (!updated[p]) continue;
      if (model.shape.residual) {
        out.col(p) += delta_state.col(p);
      } else {
        out.col(p) = delta_state.col(p);
      }
    }
  } else if (model.shape.residual) {
    out += delta_state;
  } else {
    out = delta_state;
  }
  if (!out.allFinite()) {
    throw NumericalDivergence("non-finite cell state produced at step " + std::to_string(t));
  }

  result.assignment.chosen = chosen;
  result.assignment.probs = probs;

  if (tape) {
    tape->input = grid;
    tape->perception = std::move(perception);
    tape->noise = std::move(noise);
    tape->pre_activation = std::move(pre);
    tape->deltas = std::move(deltas);
    tape->probs = std::move(probs);
    tape->surrogate = std::move(surrogate);
    tape->selector_pre = std::move(selector_pre);
    tape->chosen = std::move(chosen);
    tape->hard = hard;
    tape->temperature = temperature;
    tape->gaussian = std::move(gaussian);
    tape->sigma = std::move(sigma);
    tape->updated = std::move(updated);
    tape->zero_sigma = opts.zero_sigma;
  }
  return result;
}

template <typename Scalar>
std::vector<Grid<Scalar>> rollout(const Model<Scalar>& model, const Grid<Scalar>& grid, int n_steps,
                                  const StepOptions& opts, const RngStream& rng, std::uint64_t first_step) {
  if (n_steps < 0) throw UsageError("rollout: n_steps must be >= 0");
  std::vector<Grid<Scalar>> out;
  out.reserve(static_cast<std::size_t>(n_steps) + 1);
  out.push_back(grid);
  for (int i = 0; i < n_steps; ++i) {
    try {
      out.push_back(step(model, out.back(), opts, rng, first_step + static_cast<std::uint64_t>(i)).grid);
    } catch (const NumericalDivergence& e) {
      throw NumericalDivergence("rollout diverged at step " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

template <typename Scalar>
Mat<Scalar> step_backward(const Model<Scalar>& model, const StepTape<Scalar>& tape, const Mat<Scalar>& d_output,
                          Model<Scalar>& grads, bool want_input_grad) {
  const int c = model.channels();
  const Index n = tape.input.pixels();
  if (d_output.rows() != c || d_output.cols() != n) throw UsageError("step_backward: gradient shape mismatch");
  const Variant variant = model.variant();
  const bool mixture = is_mixture(variant);
  const int k_rules = model.rule_count();
  if (static_cast<int>(tape.deltas.size()) != k_rules) throw UsageError("step_backward: tape was not recorded");

  Mat<Scalar> d_input;
  if (want_input_grad) d_input = Mat<Scalar>::Zero(c, n);

  // Output mixing.
  Mat<Scalar> d_delta_state = d_output;
  for (Index p = 0; p < n; ++p) {
    if (!tape.updated[p]) d_delta_state.col(p).setZero();
  }
  if (want_input_grad) {
    if (model.shape.residual) {
      d_input += d_output;
    } else {
      for (Index p = 0; p < n; ++p) {
        if (!tape.updated[p]) d_input.col(p) += d_output.col(p);
      }
    }
  }

  Mat<Scalar> d_update;
  if (variant == Variant::Gca) {
    d_update.resize(2 * c, n);
    d_update.topRows(c) = d_delta_state;
    if (tape.zero_sigma) {
      d_update.bottomRows(c).setZero();
    } else {
      d_update.bottomRows(c) =
          (d_delta_state.array() * tape.gaussian.array() * tape.sigma.array() * Scalar(0.5)).matrix();
    }
  } else {
    d_update = std::move(d_delta_state);
  }

  Mat<Scalar> d_perception;
  if (want_input_grad) d_perception = Mat<Scalar>::Zero(tape.perception.rows(), n);

  for (int r = 0; r < k_rules; ++r) {
    const RuleNet<Scalar>& rule = model.rules[r];
    RuleNet<Scalar>& g = grads.rules[r];
    std::vector<Index> idx;
    if (tape.hard) {
      for (Index p = 0; p < n; ++p) {
        if (tape.chosen[p] == r) idx.push_back(p);
      }
      if (idx.empty()) continue;
    }
    const bool all = !tape.hard || static_cast<Index>(idx.size()) == n;
    Mat<Scalar> feats, pre, noise, d_delta;
    if (all) {
      feats = tape.perception;
      pre = tape.pre_activation[r];
      noise = tape.noise;
      d_delta = tape.hard ? d_update : (d_update.array().rowwise() * tape.surrogate.row(r).array()).matrix();
    } else {
      feats = tape.perception(Eigen::all, idx);
      pre = tape.pre_activation[r](Eigen::all, idx);
      if (tape.noise.size()) noise = tape.noise(Eigen::all, idx);
      d_delta = d_update(Eigen::all, idx);
    }
    const Mat<Scalar> hidden = hidden_with_noise(pre, noise.size() ? &noise : nullptr);
    Mat<Scalar> d_hidden;
    dense_per_pixel_backward(hidden, rule.w2, d_delta, g.w2, g.b2, &d_hidden);
    Mat<Scalar> d_pre = d_hidden.topRows(pre.rows());
    d_pre = (pre.array() > Scalar(0)).select(d_pre, Scalar(0));
    Mat<Scalar> d_feats;
    dense_per_pixel_backward(feats, rule.w1, d_pre, g.w1, g.b1, want_input_grad ? &d_feats : nullptr);
    if (want_input_grad) {
      if (all) {
        d_perception += d_feats;
      } else {
        d_perception(Eigen::all, idx) += d_feats;
      }
    }
  }

  if (mixture) {
    // dL/dw_k = <dL/d update, delta_k> per pixel, pushed through the relaxed
    // weights (straight-through when the forward choice was hard).
    Mat<Scalar> d_weight(k_rules, n);
    for (int r = 0; r < k_rules; ++r) {
      d_weight.row(r) = (d_update.array() * tape.deltas[r].array()).colwise().sum().matrix();
    }
    const Mat<Scalar>& y = tape.surrogate;
    const Mat<Scalar>& prob = tape.probs;
    const Scalar inv_tau = static_cast<Scalar>(1.0 / tape.temperature);
    Mat<Scalar> d_logits(k_rules, n);
    for (Index p = 0; p < n; ++p) {
      Scalar ydy = 0;
      for (int r = 0; r < k_rules; ++r) ydy += y(r, p) * d_weight(r, p);
      Scalar sum_dlogp = 0;
      for (int r = 0; r < k_rules; ++r) {
        const Scalar dlogp = y(r, p) * (d_weight(r, p) - ydy) * inv_tau;
        d_logits(r, p) = dlogp;
        sum_dlogp += dlogp;
      }
      for (int r = 0; r < k_rules; ++r) d_logits(r, p) -= prob(r, p) * sum_dlogp;
    }
    const SelectorNet<Scalar>& sel = *model.selector;
    SelectorNet<Scalar>& gs = *grads.selector;
    const Mat<Scalar> hidden = tape.selector_pre.cwiseMax(Scalar(0));
    Mat<Scalar> d_hidden;
    dense_per_pixel_backward(hidden, sel.v2, d_logits, gs.v2, gs.c2, &d_hidden);
    Mat<Scalar> d_pre = (tape.selector_pre.array() > Scalar(0)).select(d_hidden, Scalar(0));
    Mat<Scalar> d_state;
    dense_per_pixel_backward(tape.input.data, sel.v1, d_pre, gs.v1, gs.c1, want_input_grad ? &d_state : nullptr);
    if (want_input_grad) d_input += d_state;
  }

  if (want_input_grad) sobel_perceive_adjoint(d_perception, tape.input.height, tape.input.width, d_input);
  return d_input;
}

template <typename Scalar>
void rollout_backward(const Model<Scalar>& model, const std::vector<StepTape<Scalar>>& tapes,
                      const Mat<Scalar>& d_final, Model<Scalar>& grads) {
  Mat<Scalar> d = d_final;
  for (std::size_t i = tapes.size(); i-- > 0;) {
    d = step_backward(model, tapes[i], d, grads, i > 0);
  }
}

#define MNCA_INSTANTIATE(S)                                                                                         \
  template struct Model<S>;                                                                                        \
  template Mat<S> rule_delta<S>(const RuleNet<S>&, const Mat<S>&, const Mat<S>*);                                  \
  template Mat<S> select_probs<S>(const SelectorNet<S>&, const Grid<S>&, const std::vector<double>&);              \
  template StepResult<S> step<S>(const Model<S>&, const Grid<S>&, const StepOptions&, const RngStream&,            \
                                 std::uint64_t, StepTape<S>*);                                                     \
  template std::vector<Grid<S>> rollout<S>(const Model<S>&, const Grid<S>&, int, const StepOptions&,               \
                                           const RngStream&, std::uint64_t);                                       \
  template Mat<S> step_backward<S>(const Model<S>&, const StepTape<S>&, const Mat<S>&, Model<S>&, bool);           \
  template void rollout_backward<S>(const Model<S>&, const std::vector<StepTape<S>>&, const Mat<S>&, Model<S>&);

MNCA_INSTANTIATE(float)
MNCA_INSTANTIATE(double)

#undef MNCA_INSTANTIATE

}  // namespace mnca
