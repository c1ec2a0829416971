#ifndef CHIPMRF_DISTRIBUTIONS_HPP
#define CHIPMRF_DISTRIBUTIONS_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "error.hpp"
#include "random.hpp"

namespace chipmrf {

using count_t = std::uint32_t;

/// Log-gamma for x > 0 by the Lanczos approximation (g = 7, nine terms),
/// good to roughly 15 significant digits over the positive axis.
inline double log_gamma(double x) {
  static constexpr std::array<double, 9> coef = {
      0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
      771.32342877765313,      -176.61502916214059,   12.507343278686905,
      -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};
  if (x < 0.5) {
    // reflection
    return std::log(std::numbers::pi / std::abs(std::sin(std::numbers::pi * x))) -
           log_gamma(1.0 - x);
  }
  x -= 1.0;
  double a = coef[0];
  const double t = x + 7.5;
  for (int i = 1; i < 9; ++i)
    a += coef[i] / (x + i);
  return 0.5 * std::log(2.0 * std::numbers::pi) + (x + 0.5) * std::log(t) - t +
         std::log(a);
}

namespace detail {

constexpr std::size_t log_factorial_table_size = 1024;

inline const std::vector<double> &log_factorial_table() {
  static const std::vector<double> table = [] {
    std::vector<double> t(log_factorial_table_size);
    t[0] = 0.0;
    for (std::size_t k = 1; k < t.size(); ++k)
      t[k] = t[k - 1] + std::log(static_cast<double>(k));
    return t;
  }();
  return table;
}

inline double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity())
    return b;
  if (b == -std::numeric_limits<double>::infinity())
    return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

} // namespace detail

inline double log_factorial(count_t y) {
  const auto &t = detail::log_factorial_table();
  if (y < t.size())
    return t[y];
  return log_gamma(static_cast<double>(y) + 1.0);
}

// log Gamma(y + phi) - log Gamma(phi); direct product for small y keeps
// precision when phi is large.
inline double log_rising_factorial(double phi, count_t y) {
  if (y <= 32) {
    double s = 0.0;
    for (count_t k = 0; k < y; ++k)
      s += std::log(phi + k);
    return s;
  }
  return log_gamma(phi + y) - log_gamma(phi);
}

struct PoissonParams {
  double lambda;
};

/// Negative binomial by mean and dispersion; variance is mu + mu^2/phi.
struct NbParams {
  double mu;
  double phi;
};

/// pi is the weight of the count component; 1 - pi is the structural-zero mass.
struct ZeroInflation {
  double pi;
};

struct ZipParams {
  ZeroInflation zero;
  PoissonParams count;
};

struct ZinbParams {
  ZeroInflation zero;
  NbParams count;
};

using CountDistribution =
    std::variant<PoissonParams, NbParams, ZipParams, ZinbParams>;

inline void validate(const PoissonParams &p) {
  if (!(p.lambda > 0.0) || !std::isfinite(p.lambda))
    throw invalid_parameter("Poisson rate must be positive and finite, got " +
                            std::to_string(p.lambda));
}

inline void validate(const NbParams &p) {
  if (!(p.mu > 0.0) || !std::isfinite(p.mu))
    throw invalid_parameter("NB mean must be positive and finite, got " +
                            std::to_string(p.mu));
  if (!(p.phi > 0.0) || !std::isfinite(p.phi))
    throw invalid_parameter("NB dispersion must be positive and finite, got " +
                            std::to_string(p.phi));
}

inline void validate(const ZeroInflation &z) {
  if (!(z.pi >= 0.0 && z.pi <= 1.0))
    throw invalid_parameter("zero-inflation weight must lie in [0,1], got " +
                            std::to_string(z.pi));
}

inline void validate(const ZipParams &p) {
  validate(p.zero);
  validate(p.count);
}

inline void validate(const ZinbParams &p) {
  validate(p.zero);
  validate(p.count);
}

inline void validate(const CountDistribution &d) {
  std::visit([](const auto &p) { validate(p); }, d);
}

// Unchecked kernels, used on hot paths after parameters were validated once.
namespace detail {

inline double pois_logpmf_raw(count_t y, double lambda) {
  return y * std::log(lambda) - lambda - log_factorial(y);
}

inline double nb_logpmf_raw(count_t y, double mu, double phi) {
  // log(phi/(mu+phi)) = -log1p(mu/phi)
  const double log_p0 = -std::log1p(mu / phi);
  double r = phi * log_p0;
  if (y > 0)
    r += log_rising_factorial(phi, y) - log_factorial(y) +
         y * (std::log(mu) - std::log(mu + phi));
  return r;
}

inline double zero_inflated_raw(count_t y, double pi, double count_logpmf) {
  if (y > 0)
    return pi > 0.0 ? std::log(pi) + count_logpmf
                    : -std::numeric_limits<double>::infinity();
  if (pi >= 1.0)
    return count_logpmf;
  if (pi <= 0.0)
    return 0.0;
  return log_sum_exp(std::log1p(-pi), std::log(pi) + count_logpmf);
}

} // namespace detail

inline double pois_logpmf(count_t y, PoissonParams p) {
  validate(p);
  return detail::pois_logpmf_raw(y, p.lambda);
}

inline double nb_logpmf(count_t y, NbParams p) {
  validate(p);
  return detail::nb_logpmf_raw(y, p.mu, p.phi);
}

inline double zip_logpmf(count_t y, ZeroInflation z, PoissonParams p) {
  validate(z);
  validate(p);
  return detail::zero_inflated_raw(y, z.pi, detail::pois_logpmf_raw(y, p.lambda));
}

inline double zinb_logpmf(count_t y, ZeroInflation z, NbParams p) {
  validate(z);
  validate(p);
  return detail::zero_inflated_raw(y, z.pi, detail::nb_logpmf_raw(y, p.mu, p.phi));
}

inline double logpmf(count_t y, const CountDistribution &d) {
  return std::visit(
      [y](const auto &p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, PoissonParams>)
          return pois_logpmf(y, p);
        else if constexpr (std::is_same_v<T, NbParams>)
          return nb_logpmf(y, p);
        else if constexpr (std::is_same_v<T, ZipParams>)
          return zip_logpmf(y, p.zero, p.count);
        else
          return zinb_logpmf(y, p.zero, p.count);
      },
      d);
}

inline double mean(const CountDistribution &d) {
  return std::visit(
      [](const auto &p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, PoissonParams>)
          return p.lambda;
        else if constexpr (std::is_same_v<T, NbParams>)
          return p.mu;
        else if constexpr (std::is_same_v<T, ZipParams>)
          return p.zero.pi * p.count.lambda;
        else
          return p.zero.pi * p.count.mu;
      },
      d);
}

namespace detail {

inline count_t draw_poisson(double lambda, Rng &rng) {
  std::poisson_distribution<count_t> pd(lambda);
  return pd(rng);
}

// Gamma-Poisson mixture.
inline count_t draw_nb(double mu, double phi, Rng &rng) {
  const double rate = draw_gamma(phi, phi / mu, rng);
  if (rate <= 0.0)
    return 0;
  return draw_poisson(rate, rng);
}

} // namespace detail

inline count_t sample_one(const CountDistribution &d, Rng &rng) {
  return std::visit(
      [&rng](const auto &p) -> count_t {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, PoissonParams>) {
          return detail::draw_poisson(p.lambda, rng);
        } else if constexpr (std::is_same_v<T, NbParams>) {
          return detail::draw_nb(p.mu, p.phi, rng);
        } else if constexpr (std::is_same_v<T, ZipParams>) {
          if (uniform01(rng) >= p.zero.pi)
            return 0;
          return detail::draw_poisson(p.count.lambda, rng);
        } else {
          if (uniform01(rng) >= p.zero.pi)
            return 0;
          return detail::draw_nb(p.count.mu, p.count.phi, rng);
        }
      },
      d);
}

/// i.i.d. draws; deterministic for a given generator state.
inline std::vector<count_t> sample(const CountDistribution &d, std::size_t count,
                                   Rng &rng) {
  validate(d);
  std::vector<count_t> out(count);
  for (auto &v : out)
    v = sample_one(d, rng);
  return out;
}

} // namespace chipmrf

#endif
