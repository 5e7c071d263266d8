#pragma once

#include "mnca/model.hpp"

#include <vector>

namespace mnca {

/// Adam moments shaped like the model they optimize.
template <typename Scalar>
struct AdamState {
  Model<Scalar> m;
  Model<Scalar> v;
  long long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_model(const Model<Scalar>& model) {
    AdamState s;
    s.m = model.zeros_like();
    s.v = model.zeros_like();
    return s;
  }
};

/// One bias-corrected Adam step in place.
template <typename Scalar>
void adam_update(Model<Scalar>& params, const Model<Scalar>& grads, AdamState<Scalar>& state, double lr);

/// base * gamma^(number of milestones <= epoch).
double lr_at(double base, const std::vector<int>& milestones, double gamma, int epoch);

/// Per tensor g <- g / (||g||_2 + eps).
template <typename Scalar>
void normalize_grads(Model<Scalar>& grads, double eps);

}  // namespace mnca
