#pragma once

#include "mnca/model.hpp"
#include "mnca/tissue.hpp"
#include "mnca/training.hpp"

namespace mnca {

/// One-hot encodes every frame of every realization.
template <typename Scalar>
std::vector<Sequence<Scalar>> encode_cohort(const TissueCohort& cohort);

/// How a generated state is read back into labels between steps.
enum class Discretize {
  Argmax,  // each step's output is replaced by the one-hot of its argmax
  None,    // the raw state is fed forward; labels are read by argmax
};

/// Rolls the model from each realization's initial grid for the cohort's
/// number of steps. Realization r uses rng.fork(r).
template <typename Scalar>
TissueCohort generate_cohort(const Model<Scalar>& model, const TissueCohort& initial, const StepOptions& opts,
                             const RngStream& rng, Discretize mode = Discretize::Argmax);

}  // namespace mnca
