#include "mnca/optim.hpp"

#include <cmath>

namespace mnca {

template <typename Scalar>
void adam_update(Model<Scalar>& params, const Model<Scalar>& grads, AdamState<Scalar>& state, double lr) {
  std::vector<Mat<Scalar>*> p, m, v;
  std::vector<const Mat<Scalar>*> g;
  params.visit([&](const std::string&, Mat<Scalar>& t) { p.push_back(&t); });
  state.m.visit([&](const std::string&, Mat<Scalar>& t) { m.push_back(&t); });
  state.v.visit([&](const std::string&, Mat<Scalar>& t) { v.push_back(&t); });
  grads.visit([&](const std::string&, const Mat<Scalar>& t) { g.push_back(&t); });
  if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size()) {
    throw UsageError("adam_update: gradient inventory does not match parameters");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (g[i]->rows() != p[i]->rows() || g[i]->cols() != p[i]->cols()) {
      throw UsageError("adam_update: gradient shape mismatch");
    }
    Scalar* pd = p[i]->data();
    Scalar* md = m[i]->data();
    Scalar* vd = v[i]->data();
    const Scalar* gd = g[i]->data();
    for (Index j = 0; j < p[i]->size(); ++j) {
      const double gj = static_cast<double>(gd[j]);
      const double mj = state.beta1 * static_cast<double>(md[j]) + (1.0 - state.beta1) * gj;
      const double vj = state.beta2 * static_cast<double>(vd[j]) + (1.0 - state.beta2) * gj * gj;
      md[j] = static_cast<Scalar>(mj);
      vd[j] = static_cast<Scalar>(vj);
      if (gj == 0.0 && mj == 0.0) continue;
      pd[j] = static_cast<Scalar>(static_cast<double>(pd[j]) - lr * (mj / c1) / (std::sqrt(vj / c2) + state.eps));
    }
  }
}

double lr_at(double base, const std::vector<int>& milestones, double gamma, int epoch) {
  double lr = base;
  for (int m : milestones) {
    if (m <= epoch) lr *= gamma;
  }
  return lr;
}

template <typename Scalar>
void normalize_grads(Model<Scalar>& grads, double eps) {
  if (!(eps > 0.0)) throw UsageError("normalize_grads: eps must be positive");
  grads.visit([&](const std::string&, Mat<Scalar>& g) {
    double sq = 0.0;
    for (Index j = 0; j < g.size(); ++j) sq += static_cast<double>(g.data()[j]) * static_cast<double>(g.data()[j]);
    const double scale = 1.0 / (std::sqrt(sq) + eps);
    for (Index j = 0; j < g.size(); ++j) g.data()[j] = static_cast<Scalar>(static_cast<double>(g.data()[j]) * scale);
  });
}

template void adam_update<float>(Model<float>&, const Model<float>&, AdamState<float>&, double);
template void adam_update<double>(Model<double>&, const Model<double>&, AdamState<double>&, double);
template void normalize_grads<float>(Model<float>&, double);
template void normalize_grads<double>(Model<double>&, double);

}  // namespace mnca
