#pragma once

#include "mnca/rng.hpp"
#include "mnca/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <span>

namespace mnca {

/// Identity plus Sobel x/y derivatives per channel: output rows are
/// [s; grad_x s; grad_y s]. Zero padding at the borders.
template <typename Scalar>
Mat<Scalar> sobel_perceive(const Grid<Scalar>& grid);

/// Adjoint of the derivative part of sobel_perceive: maps a gradient on the
/// 3C perception rows back onto the C state rows (accumulating into `out`).
template <typename Scalar>
void sobel_perceive_adjoint(const Mat<Scalar>& d_perception, int height, int width, Mat<Scalar>& out);

/// out[c, p] = bias[c] + sum_j weights[c, j] * input[j, p], summed in
/// ascending j so results are bitwise reproducible against a naive loop.
template <typename Scalar>
Mat<Scalar> dense_per_pixel(const Mat<Scalar>& input, const Mat<Scalar>& weights, const Mat<Scalar>& bias);

/// Same as above on a raw column range; used for gathered pixel subsets.
template <typename Scalar>
void dense_per_pixel_into(const Mat<Scalar>& input, const Mat<Scalar>& weights, const Mat<Scalar>& bias,
                          Mat<Scalar>& out);

/// Gradients of dense_per_pixel given d_out. Accumulates into d_weights and
/// d_bias; writes the input gradient to d_input when non-null.
template <typename Scalar>
void dense_per_pixel_backward(const Mat<Scalar>& input, const Mat<Scalar>& weights, const Mat<Scalar>& d_out,
                              Mat<Scalar>& d_weights, Mat<Scalar>& d_bias, Mat<Scalar>* d_input);

template <typename Scalar>
struct LossValue {
  double value = 0.0;
  Mat<Scalar> grad;  // d value / d prediction, same shape as prediction
};

/// Mean squared error over the first `channels` rows; gradient is zero on the
/// remaining rows. Accumulates in 64 bit.
template <typename Scalar>
LossValue<Scalar> mse_loss(const Mat<Scalar>& prediction, const Mat<Scalar>& target, int channels);

/// Gumbel(0,1) draw from a uniform, clamped away from 0 and 1.
inline double gumbel_from_uniform(double u) {
  constexpr double lo = 1e-9;
  constexpr double hi = 1.0 - 1e-9;
  u = u < lo ? lo : (u > hi ? hi : u);
  return -std::log(-std::log(u));
}

template <typename Scalar>
struct GumbelSoftmaxResult {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> soft;   // relaxed sample, the gradient path
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> value;  // forward value: one-hot if hard, else soft
  Index argmax = 0;
};

/// y = softmax((logits + g) / temperature) with g_k = -log(-log u_k). In hard
/// mode the forward value is one-hot(argmax y) (straight-through).
template <typename Scalar>
GumbelSoftmaxResult<Scalar> gumbel_softmax(std::span<const Scalar> logits, double temperature, const RngStream& rng,
                                           std::uint64_t step, std::uint64_t cell, bool hard);

}  // namespace mnca
