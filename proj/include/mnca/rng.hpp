#pragma once

#include <cstdint>
#include <span>

namespace mnca {

/// Counter-based random stream: every draw is a pure function of
/// (seed, step, cell, draw), so results do not depend on evaluation order
/// or on how work is split across threads.
class RngStream {
 public:
  constexpr RngStream() = default;
  constexpr explicit RngStream(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// Independent child stream, e.g. one per realization or batch member.
  RngStream fork(std::uint64_t tag) const;
  RngStream fork(std::uint64_t a, std::uint64_t b) const { return fork(a).fork(b); }

  std::uint64_t bits(std::uint64_t step, std::uint64_t cell, std::uint64_t draw) const;

  /// Uniform in the open interval (0, 1).
  double uniform(std::uint64_t step, std::uint64_t cell, std::uint64_t draw) const;

  /// Standard normal by Box-Muller over two uniforms derived from `draw`.
  double normal(std::uint64_t step, std::uint64_t cell, std::uint64_t draw) const;

  /// Integer uniform on [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi, std::uint64_t step, std::uint64_t cell,
                           std::uint64_t draw) const;

  /// Index drawn from `probs` by inverse CDF. Throws UsageError for negative
  /// entries or a total further than 1e-6 from one.
  std::size_t categorical(std::span<const double> probs, std::uint64_t step, std::uint64_t cell,
                          std::uint64_t draw) const;

 private:
  std::uint64_t seed_ = 0;
};

/// Draw-index namespaces so unrelated consumers never share coordinates.
namespace draw_tag {
inline constexpr std::uint64_t kDropout = 1ull << 32;
inline constexpr std::uint64_t kNoise = 2ull << 32;
inline constexpr std::uint64_t kCategorical = 3ull << 32;
inline constexpr std::uint64_t kGumbel = 4ull << 32;
inline constexpr std::uint64_t kGaussian = 5ull << 32;
}  // namespace draw_tag

}  // namespace mnca
