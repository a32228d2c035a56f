#ifndef POINCARE_RNG_HPP_
#define POINCARE_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace poincare {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stateless stream key: every (seed, stream, counter) triple maps to an
// independent-looking 64-bit word, so results never depend on the order in
// which streams are advanced.
inline std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ counter);
}

// Uniform in (0, 1], never zero (safe for log).
inline double to_unit_open(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

// Two independent standard normals from one counter via Box-Muller.
inline std::pair<double, double> counter_normal_pair(std::uint64_t seed, std::uint64_t stream,
                                                     std::uint64_t counter) {
  const std::uint64_t h = counter_hash(seed, stream, counter);
  const double u1 = to_unit_open(h);
  const double u2 = to_unit_open(splitmix64(h));
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(a), r * std::sin(a)};
}

}  // namespace poincare

#endif  // POINCARE_RNG_HPP_
