#include "mnca/rng.hpp"

#include "mnca/tensor.hpp"

#include <cmath>
#include <numbers>

namespace mnca {

namespace {

constexpr std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

RngStream RngStream::fork(std::uint64_t tag) const {
  return RngStream(splitmix(splitmix(seed_ ^ 0x5851f42d4c957f2dull) + splitmix(tag + 0x14057b7ef767814full)));
}

std::uint64_t RngStream::bits(std::uint64_t step, std::uint64_t cell, std::uint64_t draw) const {
  std::uint64_t h = splitmix(seed_);
  h = splitmix(h ^ splitmix(step + 0x632be59bd9b4e019ull));
  h = splitmix(h ^ splitmix(cell + 0x8cb92ba72f3d8dd7ull));
  h = splitmix(h ^ splitmix(draw + 0xd6e8feb86659fd93ull));
  return h;
}

double RngStream::uniform(std::uint64_t step, std::uint64_t cell, std::uint64_t draw) const {
  const std::uint64_t b = bits(step, cell, draw) >> 11;
  return (static_cast<double>(b) + 0.5) * 0x1.0p-53;
}

double RngStream::normal(std::uint64_t step, std::uint64_t cell, std::uint64_t draw) const {
  // Second uniform lives in the top-bit half of the draw space so that normal
  // draws never alias uniform draws with nearby tags.
  const double u1 = uniform(step, cell, draw | (1ull << 63));
  const double u2 = uniform(step, cell, draw | (3ull << 62));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::int64_t RngStream::uniform_int(std::int64_t lo, std::int64_t hi, std::uint64_t step, std::uint64_t cell,
                                    std::uint64_t draw) const {
  if (hi < lo) throw UsageError("uniform_int: empty range");
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  const auto v = static_cast<std::uint64_t>(uniform(step, cell, draw) * static_cast<double>(span));
  return lo + static_cast<std::int64_t>(v < span ? v : span - 1);
}

std::size_t RngStream::categorical(std::span<const double> probs, std::uint64_t step, std::uint64_t cell,
                                   std::uint64_t draw) const {
  if (probs.empty()) throw UsageError("categorical: empty probability vector");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw UsageError("categorical: negative or NaN probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6) throw UsageError("categorical: probabilities do not sum to 1");
  const double u = uniform(step, cell, draw) * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (probs[k] > 0.0) last_positive = k;
    acc += probs[k];
    if (u < acc && probs[k] > 0.0) return k;
  }
  return last_positive;
}

}  // namespace mnca
