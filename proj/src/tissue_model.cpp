#include "mnca/tissue_model.hpp"

#include "mnca/parallel.hpp"

namespace mnca {

template <typename Scalar>
std::vector<Sequence<Scalar>> encode_cohort(const TissueCohort& cohort) {
  std::vector<Sequence<Scalar>> out(cohort.realizations.size());
  for (std::size_t r = 0; r < out.size(); ++r) {
    for (const auto& g : cohort.realizations[r]) out[r].push_back(one_hot<Scalar>(g));
  }
  return out;
}

template <typename Scalar>
TissueCohort generate_cohort(const Model<Scalar>& model, const TissueCohort& initial, const StepOptions& opts,
                             const RngStream& rng, Discretize mode) {
  if (model.channels() < kCellLabels) throw ConfigError("tissue models need at least 6 channels");
  TissueCohort out;
  const int steps = initial.steps();
  out.realizations.resize(initial.realizations.size());
  parallel_for(out.realizations.size(), [&](std::size_t r) {
    const RngStream stream = rng.fork(static_cast<std::uint64_t>(r));
    const CellGrid& start = initial.realizations[r].front();
    Grid<Scalar> state(model.channels(), start.size, start.size);
    state.data.topRows(kCellLabels) = one_hot<Scalar>(start).data;
    Trajectory traj{start};
    for (int t = 0; t < steps; ++t) {
      try {
        state = step(model, state, opts, stream, static_cast<std::uint64_t>(t)).grid;
      } catch (const NumericalDivergence& e) {
        throw NumericalDivergence("generation diverged at step " + std::to_string(t) + ": " + e.what());
      }
      CellGrid labels = decode(state);
      if (mode == Discretize::Argmax) {
        state.data.setZero();
        state.data.topRows(kCellLabels) = one_hot<Scalar>(labels).data;
      }
      traj.push_back(std::move(labels));
    }
    out.realizations[r] = std::move(traj);
  });
  return out;
}

template std::vector<Sequence<float>> encode_cohort<float>(const TissueCohort&);
template std::vector<Sequence<double>> encode_cohort<double>(const TissueCohort&);
template TissueCohort generate_cohort<float>(const Model<float>&, const TissueCohort&, const StepOptions&,
                                             const RngStream&, Discretize);
template TissueCohort generate_cohort<double>(const Model<double>&, const TissueCohort&, const StepOptions&,
                                              const RngStream&, Discretize);

}  // namespace mnca
