#ifndef CHIPMRF_RANDOM_HPP
#define CHIPMRF_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace chipmrf {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Streams are keyed by name, never by position, so reordering inputs
// cannot shift which generator a block of work receives.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view key) {
  return splitmix64(splitmix64(master) ^ fnv1a(key));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) + splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t master, std::string_view key) {
  return Rng(derive_seed(master, key));
}

// 53-bit uniform on [0,1).
inline double uniform01(Rng &rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double draw_gamma(double shape, double rate, Rng &rng) {
  std::gamma_distribution<double> g(shape, 1.0 / rate);
  return g(rng);
}

inline double draw_beta(double a, double b, Rng &rng) {
  const double x = draw_gamma(a, 1.0, rng);
  const double y = draw_gamma(b, 1.0, rng);
  const double s = x + y;
  if (s <= 0.0)
    return uniform01(rng) < a / (a + b) ? 1.0 : 0.0;
  return x / s;
}

inline double draw_normal(Rng &rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return n(rng);
}

inline std::uint64_t draw_binomial(std::uint64_t n, double p, Rng &rng) {
  if (n == 0 || p <= 0.0)
    return 0;
  if (p >= 1.0)
    return n;
  std::binomial_distribution<std::uint64_t> b(n, p);
  return b(rng);
}

} // namespace chipmrf

#endif
