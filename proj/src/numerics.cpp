#include "mnca/numerics.hpp"

#include <algorithm>
#include <limits>

namespace mnca {

namespace {

template <typename Scalar>
void sobel_channel(const Scalar* s, int h, int w, Scalar* gx, Scalar* gy, Scalar sign) {
  auto at = [&](int y, int x) -> Scalar {
    if (y < 0 || y >= h || x < 0 || x >= w) return Scalar(0);
    return s[Index(y) * w + x];
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Scalar dx = (at(y - 1, x + 1) - at(y - 1, x - 1)) + Scalar(2) * (at(y, x + 1) - at(y, x - 1)) +
                        (at(y + 1, x + 1) - at(y + 1, x - 1));
      const Scalar dy = (at(y + 1, x - 1) - at(y - 1, x - 1)) + Scalar(2) * (at(y + 1, x) - at(y - 1, x)) +
                        (at(y + 1, x + 1) - at(y - 1, x + 1));
      gx[Index(y) * w + x] += sign * dx;
      gy[Index(y) * w + x] += sign * dy;
    }
  }
}

}  // namespace

template <typename Scalar>
Mat<Scalar> sobel_perceive(const Grid<Scalar>& grid) {
  const int c = grid.channels();
  const Index n = grid.pixels();
  Mat<Scalar> out = Mat<Scalar>::Zero(3 * c, n);
  out.topRows(c) = grid.data;
  for (int ch = 0; ch < c; ++ch) {
    sobel_channel(grid.data.row(ch).data(), grid.height, grid.width, out.row(c + ch).data(),
                  out.row(2 * c + ch).data(), Scalar(1));
  }
  return out;
}

template <typename Scalar>
void sobel_perceive_adjoint(const Mat<Scalar>& d_perception, int height, int width, Mat<Scalar>& out) {
  const Index c = d_perception.rows() / 3;
  if (out.rows() != c || out.cols() != d_perception.cols()) throw UsageError("sobel_perceive_adjoint: shape mismatch");
  out += d_perception.topRows(c);
  // Sobel kernels are antisymmetric, so the zero-padded adjoint of each
  // derivative operator is its negation.
  Mat<Scalar> scratch = Mat<Scalar>::Zero(1, d_perception.cols());
  for (Index ch = 0; ch < c; ++ch) {
    scratch.setZero();
    Mat<Scalar> unused = Mat<Scalar>::Zero(1, d_perception.cols());
    sobel_channel(d_perception.row(c + ch).data(), height, width, scratch.data(), unused.data(), Scalar(-1));
    out.row(ch) += scratch;
    scratch.setZero();
    unused.setZero();
    sobel_channel(d_perception.row(2 * c + ch).data(), height, width, unused.data(), scratch.data(), Scalar(-1));
    out.row(ch) += scratch;
  }
}

template <typename Scalar>
void dense_per_pixel_into(const Mat<Scalar>& input, const Mat<Scalar>& weights, const Mat<Scalar>& bias,
                          Mat<Scalar>& out) {
  const Index cin = input.rows();
  const Index cols = input.cols();
  const Index cout = weights.rows();
  if (weights.cols() != cin || bias.rows() != cout || bias.cols() != 1) {
    throw ConfigError("dense_per_pixel: weights " + std::to_string(weights.rows()) + "x" +
                      std::to_string(weights.cols()) + " incompatible with input of " + std::to_string(cin) +
                      " channels");
  }
  out.resize(cout, cols);
  constexpr Index kChunk = 64;
  constexpr Index kRows = 4;
  const Scalar* x = input.data();
  alignas(64) Scalar acc[kRows][kChunk];

  for (Index p0 = 0; p0 < cols; p0 += kChunk) {
    const Index n = std::min(kChunk, cols - p0);
    Index c = 0;
    for (; c + kRows <= cout; c += kRows) {
      for (Index r = 0; r < kRows; ++r) std::fill_n(acc[r], kChunk, bias(c + r, 0));
      for (Index j = 0; j < cin; ++j) {
        const Scalar* xj = x + j * cols + p0;
        const Scalar w0 = weights(c, j), w1 = weights(c + 1, j), w2 = weights(c + 2, j), w3 = weights(c + 3, j);
        if (n == kChunk) {
          for (Index q = 0; q < kChunk; ++q) {
            const Scalar v = xj[q];
            acc[0][q] += w0 * v;
            acc[1][q] += w1 * v;
            acc[2][q] += w2 * v;
            acc[3][q] += w3 * v;
          }
        } else {
          for (Index q = 0; q < n; ++q) {
            const Scalar v = xj[q];
            acc[0][q] += w0 * v;
            acc[1][q] += w1 * v;
            acc[2][q] += w2 * v;
            acc[3][q] += w3 * v;
          }
        }
      }
      for (Index r = 0; r < kRows; ++r) std::copy_n(acc[r], n, out.row(c + r).data() + p0);
    }
    for (; c < cout; ++c) {
      std::fill_n(acc[0], kChunk, bias(c, 0));
      for (Index j = 0; j < cin; ++j) {
        const Scalar* xj = x + j * cols + p0;
        const Scalar w0 = weights(c, j);
        for (Index q = 0; q < n; ++q) acc[0][q] += w0 * xj[q];
      }
      std::copy_n(acc[0], n, out.row(c).data() + p0);
    }
  }
}

template <typename Scalar>
Mat<Scalar> dense_per_pixel(const Mat<Scalar>& input, const Mat<Scalar>& weights, const Mat<Scalar>& bias) {
  Mat<Scalar> out;
  dense_per_pixel_into(input, weights, bias, out);
  return out;
}

template <typename Scalar>
void dense_per_pixel_backward(const Mat<Scalar>& input, const Mat<Scalar>& weights, const Mat<Scalar>& d_out,
                              Mat<Scalar>& d_weights, Mat<Scalar>& d_bias, Mat<Scalar>* d_input) {
  d_weights.noalias() += d_out * input.transpose();
  d_bias += d_out.rowwise().sum();
  if (d_input) d_input->noalias() = weights.transpose() * d_out;
}

template <typename Scalar>
LossValue<Scalar> mse_loss(const Mat<Scalar>& prediction, const Mat<Scalar>& target, int channels) {
  if (prediction.rows() < channels || target.rows() < channels || prediction.cols() != target.cols()) {
    throw UsageError("mse_loss: shape mismatch");
  }
  LossValue<Scalar> out;
  out.grad = Mat<Scalar>::Zero(prediction.rows(), prediction.cols());
  const double denom = static_cast<double>(channels) * static_cast<double>(prediction.cols());
  double acc = 0.0;
  for (int c = 0; c < channels; ++c) {
    for (Index p = 0; p < prediction.cols(); ++p) {
      const double diff = static_cast<double>(prediction(c, p)) - static_cast<double>(target(c, p));
      acc += diff * diff;
      out.grad(c, p) = static_cast<Scalar>(2.0 * diff / denom);
    }
  }
  out.value = acc / denom;
  return out;
}

template <typename Scalar>
GumbelSoftmaxResult<Scalar> gumbel_softmax(std::span<const Scalar> logits, double temperature, const RngStream& rng,
                                           std::uint64_t step, std::uint64_t cell, bool hard) {
  if (!(temperature > 0.0)) throw UsageError("gumbel_softmax: temperature must be positive");
  const Index k = static_cast<Index>(logits.size());
  if (k == 0) throw UsageError("gumbel_softmax: empty logits");
  Eigen::VectorXd z(k);
  for (Index i = 0; i < k; ++i) {
    const double g = gumbel_from_uniform(rng.uniform(step, cell, draw_tag::kGumbel + static_cast<std::uint64_t>(i)));
    z(i) = (static_cast<double>(logits[static_cast<std::size_t>(i)]) + g) / temperature;
  }
  Index best = 0;
  const double zmax = z.maxCoeff(&best);
  Eigen::VectorXd e = (z.array() - zmax).exp();
  e /= e.sum();
  GumbelSoftmaxResult<Scalar> out;
  out.soft = e.cast<Scalar>();
  out.argmax = best;
  if (hard) {
    out.value = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(k);
    out.value(best) = Scalar(1);
  } else {
    out.value = out.soft;
  }
  return out;
}

#define MNCA_INSTANTIATE(S)                                                                                       \
  template Mat<S> sobel_perceive<S>(const Grid<S>&);                                                             \
  template void sobel_perceive_adjoint<S>(const Mat<S>&, int, int, Mat<S>&);                                     \
  template Mat<S> dense_per_pixel<S>(const Mat<S>&, const Mat<S>&, const Mat<S>&);                               \
  template void dense_per_pixel_into<S>(const Mat<S>&, const Mat<S>&, const Mat<S>&, Mat<S>&);                   \
  template void dense_per_pixel_backward<S>(const Mat<S>&, const Mat<S>&, const Mat<S>&, Mat<S>&, Mat<S>&,       \
                                            Mat<S>*);                                                            \
  template LossValue<S> mse_loss<S>(const Mat<S>&, const Mat<S>&, int);                                          \
  template GumbelSoftmaxResult<S> gumbel_softmax<S>(std::span<const S>, double, const RngStream&, std::uint64_t, \
                                                    std::uint64_t, bool);

MNCA_INSTANTIATE(float)
MNCA_INSTANTIATE(double)

#undef MNCA_INSTANTIATE

}  // namespace mnca
