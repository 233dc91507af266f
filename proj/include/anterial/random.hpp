#pragma once

// Deterministic random streams for the samplers. Every stream is keyed by
// (seed, record, part, salt), so a record's noise can be revisited in any
// evaluation order; coupled two-world sampling depends on that. mt19937_64 has
// a fully pinned specification, and normals come from an explicit Box-Muller
// transform because std::normal_distribution is implementation-defined.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace anterial {

namespace detail {

// splitmix64 finalizer, used to decorrelate nearby stream keys.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t record, std::uint64_t part,
               std::uint64_t salt = 0)
      : engine_(detail::mix64(
            detail::mix64(detail::mix64(detail::mix64(seed) ^ record) ^ part) ^ salt)) {}

  // Uniform in the open interval (0,1); never returns an endpoint.
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 6.283185307179586476925286766559 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  std::vector<double> normals(std::size_t k) {
    std::vector<double> out(k);
    for (auto& v : out) v = normal();
    return out;
  }

  // Uniform integer in [0, bound); rejection keeps the draw unbiased.
  std::uint64_t below(std::uint64_t bound) {
    std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound + 1) % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x > limit);
    return x % bound;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace anterial
