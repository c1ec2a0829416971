#ifndef CHIPMRF_MIXTURE_HPP
#define CHIPMRF_MIXTURE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "data.hpp"
#include "distributions.hpp"
#include "error.hpp"
#include "model.hpp"

namespace chipmrf {

struct MixtureParams {
  double p; // P(X = 1)
  std::vector<ReplicateEmission> emissions;
};

struct MixtureFit {
  MixtureParams params;
  double loglik;
  std::vector<double> responsibilities; // P(X_m = 1 | Y)
  std::vector<double> loglik_trace;
  std::size_t iterations = 0;
  bool converged = false;
};

struct EmOptions {
  double tol = 1e-6;
  std::size_t max_iter = 20000;
  double min_weight = 1e-8; // signal proportion below this is a collapse
};

namespace detail {

inline double golden_section_max(double lo, double hi, double tol,
                                 const auto &f) {
  constexpr double invphi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Weighted NB maximum likelihood: mean in closed form, dispersion by
// golden-section search on log(phi). Never returns a worse dispersion
// than the current one.
inline void nb_weighted_mle(const CountHistogram &h, std::span<const count_t> values,
                            double &mu, double &phi) {
  if (h.total <= 0.0)
    return;
  mu = std::max(h.sum / h.total, 1e-8);
  const auto obj = [&](double log_phi) {
    return nb_histogram_loglik(h, values, mu, std::exp(log_phi));
  };
  const double best = golden_section_max(std::log(1e-4), std::log(1e5), 1e-8, obj);
  if (obj(best) >= obj(std::log(phi)))
    phi = std::exp(best);
}

} // namespace detail

/// Observed-data log-likelihood of the two-component mixture.
inline double mixture_loglik(std::span<const std::span<const count_t>> data,
                             const MixtureParams &params) {
  const std::size_t M = data.empty() ? 0 : data[0].size();
  const double lp1 = std::log(params.p), lp0 = std::log1p(-params.p);
  double ll = 0.0;
  for (std::size_t m = 0; m < M; ++m) {
    double a = lp1, b = lp0;
    for (std::size_t r = 0; r < data.size(); ++r) {
      a += params.emissions[r].log_signal(data[r][m]);
      b += params.emissions[r].log_background(data[r][m]);
    }
    ll += detail::log_sum_exp(a, b);
  }
  return ll;
}

/// E-step alone: P(X_m = 1 | Y) under fixed parameters.
inline std::vector<double> mixture_responsibilities(std::span<const std::span<const count_t>> data,
                                                    const MixtureParams &params) {
  const std::size_t M = data.empty() ? 0 : data[0].size();
  const double lp1 = std::log(params.p), lp0 = std::log1p(-params.p);
  std::vector<double> w(M);
  for (std::size_t m = 0; m < M; ++m) {
    double a = lp1, b = lp0;
    for (std::size_t r = 0; r < data.size(); ++r) {
      a += params.emissions[r].log_signal(data[r][m]);
      b += params.emissions[r].log_background(data[r][m]);
    }
    w[m] = std::exp(a - detail::log_sum_exp(a, b));
  }
  return w;
}

namespace detail {

// Bins grouped by their tuple of per-replicate count levels. The EM only
// ever needs each distinct tuple once, weighted by its multiplicity.
struct CountPatterns {
  std::size_t R = 0;
  std::vector<LevelCoding> codings;
  std::vector<std::uint32_t> levels; // pattern-major, R entries each
  std::vector<double> multiplicity;
  std::vector<std::uint32_t> pattern_of; // per bin

  explicit CountPatterns(std::span<const std::span<const count_t>> data) : R(data.size()) {
    for (auto d : data)
      codings.emplace_back(d);
    const std::size_t M = data[0].size();
    std::vector<std::uint32_t> order(M);
    std::iota(order.begin(), order.end(), 0u);
    const auto less = [&](std::uint32_t i, std::uint32_t j) {
      for (std::size_t r = 0; r < R; ++r)
        if (codings[r].level[i] != codings[r].level[j])
          return codings[r].level[i] < codings[r].level[j];
      return false;
    };
    std::sort(order.begin(), order.end(), less);
    pattern_of.resize(M);
    for (std::size_t k = 0; k < M; ++k) {
      if (k == 0 || less(order[k - 1], order[k])) {
        for (std::size_t r = 0; r < R; ++r)
          levels.push_back(codings[r].level[order[k]]);
        multiplicity.push_back(0.0);
      }
      multiplicity.back() += 1.0;
      pattern_of[order[k]] = static_cast<std::uint32_t>(multiplicity.size() - 1);
    }
  }

  std::size_t size() const { return multiplicity.size(); }
};

struct EmRun {
  MixtureParams params;
  double loglik;
  std::vector<double> weights; // per pattern
  std::vector<double> trace;
  std::size_t iterations;
  bool converged;
};

inline EmRun em_iterate(const CountPatterns &pat, Family family, MixtureParams params,
                        const EmOptions &opt) {
  const std::size_t R = pat.R, P = pat.size();
  double M = 0.0;
  for (double c : pat.multiplicity)
    M += c;
  std::vector<double> w(P), a(P), b(P);
  std::vector<std::vector<double>> t0(R), t1(R);
  CountHistogram bg, sg;
  double prev_ll = -std::numeric_limits<double>::infinity();
  EmRun run{params, 0.0, {}, {}, 0, false};

  for (std::size_t iter = 0;; ++iter) {
    const double lp1 = std::log(run.params.p), lp0 = std::log1p(-run.params.p);
    std::fill(a.begin(), a.end(), lp1);
    std::fill(b.begin(), b.end(), lp0);
    for (std::size_t r = 0; r < R; ++r) {
      const auto &v = pat.codings[r].values;
      const auto &e = run.params.emissions[r];
      t0[r].resize(v.size());
      t1[r].resize(v.size());
      for (std::size_t l = 0; l < v.size(); ++l) {
        t0[r][l] = e.log_background(v[l]);
        t1[r][l] = e.log_signal(v[l]);
      }
      for (std::size_t k = 0; k < P; ++k) {
        a[k] += t1[r][pat.levels[k * R + r]];
        b[k] += t0[r][pat.levels[k * R + r]];
      }
    }
    double ll = 0.0;
    for (std::size_t k = 0; k < P; ++k) {
      const double z = log_sum_exp(a[k], b[k]);
      ll += pat.multiplicity[k] * z;
      w[k] = std::exp(a[k] - z);
    }
    if (!std::isfinite(ll))
      throw fit_failure("non-finite mixture log-likelihood");
    run.trace.push_back(ll);
    run.loglik = ll;
    run.weights = w;
    run.iterations = iter;
    if (ll - prev_ll < opt.tol) {
      run.converged = true;
      break;
    }
    if (iter >= opt.max_iter)
      break;
    prev_ll = ll;

    // M-step
    double wsum = 0.0;
    for (std::size_t k = 0; k < P; ++k)
      wsum += pat.multiplicity[k] * w[k];
    if (wsum < opt.min_weight * M)
      throw fit_failure("signal component collapsed (weight " + std::to_string(wsum) + ")");
    run.params.p = std::clamp(wsum / M, 1e-12, 1.0 - 1e-12);

    for (std::size_t r = 0; r < R; ++r) {
      auto &e = run.params.emissions[r];
      const auto &coding = pat.codings[r];
      const std::size_t L = coding.n_levels();
      bg.reset(L);
      sg.reset(L);
      for (std::size_t k = 0; k < P; ++k) {
        const auto l = pat.levels[k * R + r];
        sg.weight[l] += pat.multiplicity[k] * w[k];
        bg.weight[l] += pat.multiplicity[k] * (1.0 - w[k]);
      }
      if (zero_inflated(family) && coding.has_zero()) {
        const double bg_all = std::accumulate(bg.weight.begin(), bg.weight.end(), 0.0);
        // expected count-component share of background zeros
        const double zeta =
            std::exp(e.log_background_count(0) + std::log(e.pi) - e.log_background(0));
        const double structural = bg.weight[0] * (1.0 - zeta);
        bg.weight[0] *= zeta;
        if (bg_all > 0)
          e.pi = std::clamp((bg_all - structural) / bg_all, 1e-12, 1.0);
      } else if (zero_inflated(family)) {
        e.pi = 1.0;
      }
      bg.finalize(coding.values);
      sg.finalize(coding.values);
      if (negative_binomial(family)) {
        nb_weighted_mle(bg, coding.values, e.bg_mean, e.bg_dispersion);
        nb_weighted_mle(sg, coding.values, e.sig_mean, e.sig_dispersion);
      } else {
        if (bg.total > 0)
          e.bg_mean = std::max(bg.sum / bg.total, 1e-8);
        if (sg.total > 0)
          e.sig_mean = std::max(sg.sum / sg.total, 1e-8);
      }
    }
  }
  return run;
}

inline Family without_inflation(Family f) {
  switch (f) {
  case Family::zip_poisson:
    return Family::poisson_poisson;
  case Family::zinb_nb:
    return Family::nb_nb;
  default:
    return f;
  }
}

} // namespace detail

/// EM for one condition: replicates share the latent state of a bin and
/// the signal weight p; each replicate has its own emissions.
///
/// Zero-inflated families are started three times (the sampler's warm
/// start, the same with half the background mass structural, and the fit
/// of the nested family with pi = 1) and the best end point is kept.
inline MixtureFit fit_em(std::span<const std::span<const count_t>> data, Family family,
                         const EmOptions &opt = {}) {
  if (data.empty())
    throw dimension_error("mixture fit needs at least one replicate");
  if (!(opt.tol > 0.0))
    throw invalid_parameter("EM tolerance must be positive");
  const std::size_t M = data[0].size();
  for (auto d : data)
    if (d.size() != M)
      throw dimension_error("replicates differ in length");
  if (M == 0)
    throw dimension_error("mixture fit needs at least one bin");

  const detail::CountPatterns pat(data);
  if (pat.size() == 1)
    throw fit_failure("all bins carry the same counts; the two components collapse");

  const Segment whole{0, M};
  const auto ws = warm_start(data, std::span(&whole, 1), family);
  MixtureParams init;
  {
    double on = 0;
    for (auto s : ws.states)
      on += s;
    init.p = std::clamp(on / static_cast<double>(M), 1e-3, 0.5);
    init.emissions = ws.emissions;
  }

  std::vector<MixtureParams> starts{init};
  if (zero_inflated(family)) {
    auto half = init;
    for (auto &e : half.emissions)
      e.pi = 0.5;
    starts.push_back(half);
    auto plain = init;
    for (auto &e : plain.emissions) {
      e.family = detail::without_inflation(family);
      e.pi = 1.0;
    }
    const auto nested = detail::em_iterate(pat, detail::without_inflation(family), plain, opt);
    auto embedded = nested.params;
    for (auto &e : embedded.emissions) {
      e.family = family;
      e.pi = 1.0;
    }
    starts.push_back(embedded);
  }

  std::optional<detail::EmRun> best;
  for (const auto &s : starts) {
    try {
      auto run = detail::em_iterate(pat, family, s, opt);
      if (!best || run.loglik > best->loglik)
        best = std::move(run);
    } catch (const fit_failure &) {
      if (&s == &starts.back() && !best)
        throw;
    }
  }

  MixtureFit fit;
  fit.params = best->params;
  fit.loglik = best->loglik;
  fit.loglik_trace = std::move(best->trace);
  fit.iterations = best->iterations;
  fit.converged = best->converged;
  fit.responsibilities.resize(M);
  for (std::size_t m = 0; m < M; ++m)
    fit.responsibilities[m] = best->weights[pat.pattern_of[m]];
  return fit;
}

inline MixtureFit fit_em(std::span<const count_t> column, Family family,
                         const EmOptions &opt = {}) {
  const std::span<const count_t> one[] = {column};
  return fit_em(std::span<const std::span<const count_t>>(one), family, opt);
}

/// One fit per condition of the design.
inline std::vector<MixtureFit> fit_em(const CountMatrix &data, const ExperimentDesign &design,
                                      Family family, const EmOptions &opt = {}) {
  const auto cols = resolve_design(design, data);
  std::vector<MixtureFit> fits;
  for (const auto &c : cols) {
    std::vector<std::span<const count_t>> spans;
    for (auto j : c)
      spans.push_back(data.column(j));
    fits.push_back(fit_em(spans, family, opt));
  }
  return fits;
}

/// Free parameters of a mixture fit of one condition: the signal weight
/// plus per-replicate emissions (single experiment: NB-NB 5, ZINB-NB 6).
inline int mixture_param_count(Family family, std::size_t replicates) {
  return 1 + emission_param_count(family) * static_cast<int>(replicates);
}

// n_obs is real so that the formula can be checked at non-integer points.
inline double bic(double loglik, int n_params, double n_obs) {
  if (!(n_obs >= 1.0))
    throw invalid_parameter("BIC needs at least one observation");
  return -2.0 * loglik + n_params * std::log(n_obs);
}

struct BicRow {
  std::string experiment;
  std::size_t bins;
  double loglik_nb;
  double loglik_zinb;
  double bic_nb;
  double bic_zinb;
};

/// NB-NB versus ZINB-NB, one single-experiment fit per data column; the
/// observation count is the number of bins.
inline std::vector<BicRow> bic_table(const CountMatrix &data, const EmOptions &opt = {}) {
  std::vector<BicRow> rows;
  for (std::size_t j = 0; j < data.n_columns(); ++j) {
    const auto col = data.column(j);
    const auto nb = fit_em(col, Family::nb_nb, opt);
    const auto zinb = fit_em(col, Family::zinb_nb, opt);
    rows.push_back({data.labels()[j], data.n_bins(), nb.loglik, zinb.loglik,
                    bic(nb.loglik, mixture_param_count(Family::nb_nb, 1), static_cast<double>(data.n_bins())),
                    bic(zinb.loglik, mixture_param_count(Family::zinb_nb, 1),
                        static_cast<double>(data.n_bins()))});
  }
  return rows;
}

} // namespace chipmrf

#endif
