#ifndef CHIPMRF_MODEL_HPP
#define CHIPMRF_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "chain.hpp"
#include "distributions.hpp"
#include "error.hpp"

namespace chipmrf {

/// Emission family: background kernel (optionally zero-inflated) / signal kernel.
enum class Family {
  zip_poisson,     // ZIP background, Poisson signal
  zinb_nb,         // ZINB background, NB signal
  poisson_poisson, // no zero inflation
  nb_nb,           // no zero inflation
};

inline bool zero_inflated(Family f) {
  return f == Family::zip_poisson || f == Family::zinb_nb;
}

inline bool negative_binomial(Family f) {
  return f == Family::zinb_nb || f == Family::nb_nb;
}

inline Family parse_family(const std::string &s) {
  if (s == "zip")
    return Family::zip_poisson;
  if (s == "zinb")
    return Family::zinb_nb;
  if (s == "pois" || s == "poisson")
    return Family::poisson_poisson;
  if (s == "nb")
    return Family::nb_nb;
  throw invalid_parameter("unknown emission family '" + s +
                          "' (expected zip, zinb, pois or nb)");
}

inline std::string to_string(Family f) {
  switch (f) {
  case Family::zip_poisson:
    return "zip";
  case Family::zinb_nb:
    return "zinb";
  case Family::poisson_poisson:
    return "pois";
  case Family::nb_nb:
    return "nb";
  }
  return "?";
}

/// Free parameters per replicate, excluding the shared latent weights.
inline int emission_param_count(Family f) {
  switch (f) {
  case Family::zip_poisson:
    return 3;
  case Family::zinb_nb:
    return 5;
  case Family::poisson_poisson:
    return 2;
  case Family::nb_nb:
    return 4;
  }
  return 0;
}

/// Signal/background parameters of one replicate. For Poisson kernels the
/// dispersion fields are unused; pi is 1 for non-inflated families.
struct ReplicateEmission {
  Family family = Family::zinb_nb;
  double pi = 1.0;
  double bg_mean = 0.5;
  double bg_dispersion = 1.0;
  double sig_mean = 2.0;
  double sig_dispersion = 1.0;

  CountDistribution background_count() const {
    if (negative_binomial(family))
      return NbParams{bg_mean, bg_dispersion};
    return PoissonParams{bg_mean};
  }

  CountDistribution background() const {
    if (family == Family::zinb_nb)
      return ZinbParams{{pi}, {bg_mean, bg_dispersion}};
    if (family == Family::zip_poisson)
      return ZipParams{{pi}, {bg_mean}};
    return background_count();
  }

  CountDistribution signal() const {
    if (negative_binomial(family))
      return NbParams{sig_mean, sig_dispersion};
    return PoissonParams{sig_mean};
  }

  double log_background_count(count_t y) const {
    return negative_binomial(family)
               ? detail::nb_logpmf_raw(y, bg_mean, bg_dispersion)
               : detail::pois_logpmf_raw(y, bg_mean);
  }

  /// Zero indicator integrated out.
  double log_background(count_t y) const {
    const double c = log_background_count(y);
    return zero_inflated(family) ? detail::zero_inflated_raw(y, pi, c) : c;
  }

  double log_signal(count_t y) const {
    return negative_binomial(family)
               ? detail::nb_logpmf_raw(y, sig_mean, sig_dispersion)
               : detail::pois_logpmf_raw(y, sig_mean);
  }

  bool operator==(const ReplicateEmission &) const = default;
};

inline void validate(const ReplicateEmission &e) {
  validate(e.background());
  validate(e.signal());
  if (!zero_inflated(e.family) && e.pi != 1.0)
    throw invalid_parameter("non-inflated family requires pi = 1");
  if (!(e.sig_mean > e.bg_mean))
    throw invalid_parameter("signal mean must exceed background mean");
}

struct BetaPrior {
  double a = 1.0;
  double b = 1.0;
};

struct GammaPrior {
  double shape = 0.01;
  double rate = 0.01;

  double logpdf(double x) const {
    return (shape - 1.0) * std::log(x) - rate * x;
  }
};

inline double beta_logpdf_kernel(double x, const BetaPrior &p) {
  return (p.a - 1.0) * std::log(x) + (p.b - 1.0) * std::log1p(-x);
}

struct PriorConfig {
  BetaPrior pi;
  BetaPrior q0;
  BetaPrior q1;
  GammaPrior poisson_rate;  // lambda0, lambda1
  GammaPrior nb_mean;       // hyperprior on mu0, mu1
  GammaPrior nb_dispersion; // hyperprior on phi0, phi1
  double initial_step = 0.2;
};

inline void validate(const PriorConfig &p) {
  for (const auto *b : {&p.pi, &p.q0, &p.q1})
    if (!(b->a > 0 && b->b > 0))
      throw invalid_parameter("Beta hyperparameters must be positive");
  for (const auto *g : {&p.poisson_rate, &p.nb_mean, &p.nb_dispersion})
    if (!(g->shape > 0 && g->rate > 0))
      throw invalid_parameter("Gamma hyperparameters must be positive");
  if (!(p.initial_step > 0))
    throw invalid_parameter("random-walk step must be positive");
}

/// A count column recoded to its distinct values, so per-value tables
/// replace per-bin density evaluations.
struct LevelCoding {
  std::vector<count_t> values;       // sorted distinct counts
  std::vector<std::uint32_t> level;  // per bin index into values

  explicit LevelCoding(std::span<const count_t> y) {
    values.assign(y.begin(), y.end());
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    level.resize(y.size());
    if (!values.empty() && values.back() < (1u << 16)) {
      std::vector<std::uint32_t> lookup(values.back() + 1, 0);
      for (std::uint32_t l = 0; l < values.size(); ++l)
        lookup[values[l]] = l;
      for (std::size_t m = 0; m < y.size(); ++m)
        level[m] = lookup[y[m]];
    } else {
      for (std::size_t m = 0; m < y.size(); ++m)
        level[m] = static_cast<std::uint32_t>(
            std::lower_bound(values.begin(), values.end(), y[m]) - values.begin());
    }
  }

  std::size_t n_levels() const { return values.size(); }
  bool has_zero() const { return !values.empty() && values.front() == 0; }
};

/// Weighted count histogram over a level coding, sufficient for the
/// likelihood of one kernel.
struct CountHistogram {
  std::vector<double> weight; // per level
  double total = 0.0;         // sum of weights
  double sum = 0.0;           // sum of weight * value

  void reset(std::size_t levels) {
    weight.assign(levels, 0.0);
    total = 0.0;
    sum = 0.0;
  }

  void finalize(std::span<const count_t> values) {
    total = 0.0;
    sum = 0.0;
    for (std::size_t l = 0; l < weight.size(); ++l) {
      total += weight[l];
      sum += weight[l] * values[l];
    }
  }
};

/// NB log-likelihood of a histogram, dropping the log y! constant.
inline double nb_histogram_loglik(const CountHistogram &h,
                                  std::span<const count_t> values, double mu,
                                  double phi) {
  if (h.total <= 0.0)
    return 0.0;
  const double lg_phi = log_gamma(phi);
  double s = 0.0;
  for (std::size_t l = 0; l < h.weight.size(); ++l) {
    if (h.weight[l] == 0.0 || values[l] == 0)
      continue;
    const double r = values[l] <= 32 ? log_rising_factorial(phi, values[l])
                                     : log_gamma(phi + values[l]) - lg_phi;
    s += h.weight[l] * r;
  }
  return s + h.sum * (std::log(mu) - std::log(mu + phi)) -
         h.total * phi * std::log1p(mu / phi);
}

/// The mu-dependent part of the NB histogram likelihood; O(1).
inline double nb_histogram_loglik_mean_part(const CountHistogram &h, double mu,
                                            double phi) {
  if (h.total <= 0.0)
    return 0.0;
  return h.sum * (std::log(mu) - std::log(mu + phi)) -
         h.total * phi * std::log1p(mu / phi);
}

struct WarmStart {
  std::vector<std::uint8_t> states;
  std::vector<ReplicateEmission> emissions;
  ChainParams chain;
};

namespace detail {

struct Moments {
  double n = 0, mean = 0, var = 0, zero_frac = 0;
};

inline Moments moments(std::span<const count_t> y,
                       std::span<const std::uint8_t> states, std::uint8_t which) {
  Moments m;
  double s = 0, ss = 0, z = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (states[i] != which)
      continue;
    m.n += 1;
    s += y[i];
    ss += static_cast<double>(y[i]) * y[i];
    z += y[i] == 0;
  }
  if (m.n > 0) {
    m.mean = s / m.n;
    m.var = m.n > 1 ? (ss - s * s / m.n) / (m.n - 1) : 0.0;
    m.zero_frac = z / m.n;
  }
  return m;
}

inline double nb_dispersion_moments(double mean, double var) {
  if (var > mean * 1.01 && mean > 0)
    return std::clamp(mean * mean / (var - mean), 0.05, 100.0);
  return 100.0;
}

} // namespace detail

/// Deterministic data-driven initial state: bins above the 95th percentile
/// of the replicate-summed counts start enriched, emissions come from
/// moments of the two groups, transitions from the initial states.
inline WarmStart warm_start(std::span<const std::span<const count_t>> columns,
                            std::span<const Segment> segments, Family family) {
  if (columns.empty())
    throw dimension_error("warm start needs at least one column");
  const std::size_t M = columns[0].size();
  std::vector<double> score(M, 0.0);
  for (auto col : columns)
    for (std::size_t m = 0; m < M; ++m)
      score[m] += col[m];

  WarmStart ws;
  ws.states.assign(M, 0);
  if (M > 0) {
    std::vector<double> sorted = score;
    const std::size_t k = static_cast<std::size_t>(0.95 * static_cast<double>(M - 1));
    std::nth_element(sorted.begin(), sorted.begin() + k, sorted.end());
    const double threshold = sorted[k];
    std::size_t hits = 0;
    for (std::size_t m = 0; m < M; ++m)
      hits += (ws.states[m] = score[m] > threshold ? 1 : 0);
    if (hits == 0) {
      const double top = *std::max_element(score.begin(), score.end());
      if (top > 0)
        for (std::size_t m = 0; m < M; ++m)
          ws.states[m] = score[m] >= top ? 1 : 0;
    }
  }

  for (auto col : columns) {
    ReplicateEmission e;
    e.family = family;
    const auto bg = detail::moments(col, ws.states, 0);
    const auto sg = detail::moments(col, ws.states, 1);
    const double m0 = std::max(bg.mean, 0.01);
    double pi = 1.0;
    double count_mean = m0;
    double count_var = bg.var;
    if (zero_inflated(family)) {
      // ZIP moment identity: var/mean - 1 = (1 - pi) * lambda
      const double lam = m0 + std::max(bg.var / m0 - 1.0, 0.0);
      pi = std::clamp(m0 / lam, 0.3, 0.99);
      count_mean = m0 / pi;
      count_var = std::max((bg.var + m0 * m0) / pi - count_mean * count_mean, 0.0);
    }
    e.pi = pi;
    e.bg_mean = count_mean;
    e.bg_dispersion = detail::nb_dispersion_moments(count_mean, count_var);
    e.sig_mean = sg.n > 0 ? std::max(sg.mean, 0.01) : 0.0;
    e.sig_dispersion = detail::nb_dispersion_moments(e.sig_mean, sg.var);
    if (!(e.sig_mean > e.bg_mean))
      e.sig_mean = e.bg_mean + std::max(1.0, e.bg_mean);
    if (!negative_binomial(family)) {
      e.bg_dispersion = 1.0;
      e.sig_dispersion = 1.0;
    }
    ws.emissions.push_back(e);
  }

  const auto tc = transition_counts(ws.states, segments);
  ws.chain.q1 = (tc.n11 + 1.0) / (tc.n11 + tc.n10 + 2.0);
  ws.chain.q0 = (tc.n01 + 1.0) / (tc.n01 + tc.n00 + 2.0);
  return ws;
}

} // namespace chipmrf

#endif
