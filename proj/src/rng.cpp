#include "cowdiff/rng.hpp"

#include <cmath>
#include <numbers>

namespace cowdiff {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed) : RngStream(seed, false) {}

RngStream::RngStream(std::uint64_t seed, bool degenerate)
    : seed_(seed), degenerate_(degenerate), engine_(splitmix64(seed)) {}

RngStream RngStream::zeros() { return RngStream(0, true); }

RngStream RngStream::derive(std::uint64_t seed, std::string_view tag) {
  // FNV-1a over the tag, mixed with the parent seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return RngStream(splitmix64(seed ^ splitmix64(h)));
}

RngStream RngStream::derive(std::uint64_t seed, std::uint64_t index) {
  return RngStream(splitmix64(splitmix64(seed) + index));
}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) return 0;
  return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
}

double RngStream::gaussian() {
  ++draws_;
  if (degenerate_) return 0.0;
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

Canvas RngStream::gaussian_canvas(const Shape& shape) {
  Canvas out(shape);
  for (double& v : out.values()) v = gaussian();
  return out;
}

}  // namespace cowdiff
