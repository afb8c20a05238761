#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "cowdiff/tensor.hpp"

namespace cowdiff {

/// Seedable standard-Gaussian source. Draws come from mt19937_64 through a
/// fixed Box-Muller transform so the sequence depends only on the seed and
/// the draw index, not on the standard library's distribution code.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  /// A degenerate stream that returns 0 for every draw.
  static RngStream zeros();

  /// Child stream for a named component, derived deterministically from
  /// (seed, tag). Used to fan one top-level seed out to independent streams.
  static RngStream derive(std::uint64_t seed, std::string_view tag);
  static RngStream derive(std::uint64_t seed, std::uint64_t index);

  double gaussian();
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// One full canvas of draws in raster order.
  Canvas gaussian_canvas(const Shape& shape);

  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  /// Number of Gaussian draws consumed so far.
  [[nodiscard]] std::uint64_t draws() const { return draws_; }

 private:
  RngStream(std::uint64_t seed, bool degenerate);

  std::uint64_t seed_;
  bool degenerate_;
  std::mt19937_64 engine_;
  std::uint64_t draws_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace cowdiff
