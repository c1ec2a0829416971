#ifndef CHIPMRF_INFERENCE_HPP
#define CHIPMRF_INFERENCE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chain.hpp"
#include "data.hpp"
#include "distributions.hpp"
#include "error.hpp"
#include "model.hpp"
#include "random.hpp"

namespace chipmrf {

struct SamplerConfig {
  std::size_t iterations = 10000; // total, burn-in included
  std::size_t burn_in = 5000;
  std::size_t thinning = 1;
  std::uint64_t seed = 1;
  bool constrained = false;
  bool hold_parameters = false; // only the latent states move
  std::size_t adapt_every = 50;
};

inline void validate(const SamplerConfig &cfg) {
  if (!(cfg.burn_in < cfg.iterations))
    throw invalid_parameter("burn-in must be smaller than the iteration count");
  if (cfg.thinning < 1)
    throw invalid_parameter("thinning must be at least 1");
  if (cfg.adapt_every < 1)
    throw invalid_parameter("adaptation window must be at least 1");
}

/// Chains sharing s = (1 - q1c) / q0c, hence a common stationary probability
/// 1 / (1 + s).
struct ConstrainedChainParams {
  double s;
  std::vector<double> q0;

  ChainParams for_condition(std::size_t c) const { return {q0[c], 1.0 - s * q0[c]}; }
  double stationary() const { return 1.0 / (1.0 + s); }
};

inline bool feasible(const ConstrainedChainParams &p) {
  if (!(p.s > 0.0) || !std::isfinite(p.s))
    return false;
  for (double q : p.q0)
    if (!(q > 0.0 && q < 1.0 && p.s * q < 1.0))
      return false;
  return true;
}

// ---------------------------------------------------------------------------
// Full conditionals

struct Neighbours {
  std::optional<std::uint8_t> prev;
  std::optional<std::uint8_t> next;
};

/// P(X = 1 | neighbours, data) given the summed per-replicate emission log
/// ratio log P1(y) - log P0(y). A missing left neighbour contributes the
/// stationary initial term; a missing right neighbour contributes nothing.
inline double x_full_conditional(Neighbours nb, double log_emission_ratio,
                                 const ChainParams &q) {
  auto side = [&](int i) {
    double l = nb.prev ? log_transition(q, *nb.prev, i) : log_initial(q, i);
    if (nb.next)
      l += log_transition(q, i, *nb.next);
    return l;
  };
  const double logit = side(1) - side(0) + log_emission_ratio;
  if (logit >= 0)
    return 1.0 / (1.0 + std::exp(-logit));
  const double e = std::exp(logit);
  return e / (1.0 + e);
}

inline double x_full_conditional(const LatentChain &chain, std::size_t m,
                                 std::span<const std::span<const count_t>> data,
                                 std::span<const ReplicateEmission> emissions,
                                 const ChainParams &q) {
  if (data.size() != emissions.size())
    throw dimension_error("one emission parameter set per replicate is required");
  const auto seg = std::find_if(chain.segments.begin(), chain.segments.end(),
                                [m](const Segment &s) { return m >= s.begin && m < s.end; });
  if (seg == chain.segments.end())
    throw dimension_error("bin index outside the chain");
  Neighbours nb;
  if (m > seg->begin)
    nb.prev = chain.states[m - 1];
  if (m + 1 < seg->end)
    nb.next = chain.states[m + 1];
  double ratio = 0.0;
  for (std::size_t r = 0; r < data.size(); ++r)
    ratio += emissions[r].log_signal(data[r][m]) - emissions[r].log_background(data[r][m]);
  return x_full_conditional(nb, ratio, q);
}

/// P(Z = 1 | X = 0, y): the count component versus a structural zero.
inline double z_full_conditional(count_t y, const ReplicateEmission &e) {
  if (y > 0 || !zero_inflated(e.family))
    return 1.0;
  const double count0 = std::exp(e.log_background_count(0));
  return e.pi * count0 / ((1.0 - e.pi) + e.pi * count0);
}

inline double z_full_conditional(count_t y, std::uint8_t state,
                                 const ReplicateEmission &e) {
  if (state != 0)
    throw precondition_violation("the zero indicator is only defined where X = 0");
  return z_full_conditional(y, e);
}

// ---------------------------------------------------------------------------
// Parameter updates

struct TransitionUpdate {
  ChainParams params;
  bool accepted;
};

/// Independence Metropolis-Hastings: Beta proposals absorb the transition
/// counts, the initial-state terms enter through the acceptance ratio.
inline TransitionUpdate update_transition_params(const TransitionCounts &tc,
                                                 const ChainParams &current,
                                                 const PriorConfig &priors, Rng &rng) {
  ChainParams prop;
  prop.q1 = draw_beta(priors.q1.a + tc.n11, priors.q1.b + tc.n10, rng);
  prop.q0 = draw_beta(priors.q0.a + tc.n01, priors.q0.b + tc.n00, rng);
  constexpr double lo = 1e-300;
  if (!(prop.q0 > lo && prop.q0 < 1.0 && prop.q1 > lo && prop.q1 < 1.0))
    return {current, false};
  const double log_ratio = initial_logdensity(tc.first_states, prop) -
                           initial_logdensity(tc.first_states, current);
  if (log_ratio >= 0.0 || std::log(uniform01(rng)) < log_ratio)
    return {prop, true};
  return {current, false};
}

struct RandomWalkStep {
  double scale = 0.2;
  std::size_t proposed = 0;
  std::size_t accepted = 0;
  std::size_t total_proposed = 0;
  std::size_t total_accepted = 0;

  void record(bool ok) {
    ++proposed;
    ++total_proposed;
    if (ok) {
      ++accepted;
      ++total_accepted;
    }
  }

  // Aim for 20-50% acceptance.
  void adapt() {
    if (proposed == 0)
      return;
    const double rate = static_cast<double>(accepted) / static_cast<double>(proposed);
    if (rate < 0.2)
      scale *= 0.7;
    else if (rate > 0.5)
      scale *= 1.4;
    scale = std::clamp(scale, 1e-4, 5.0);
    proposed = accepted = 0;
  }

  double acceptance() const {
    return total_proposed ? static_cast<double>(total_accepted) /
                                static_cast<double>(total_proposed)
                          : 0.0;
  }
};

struct EmissionSteps {
  RandomWalkStep bg_mean, bg_dispersion, sig_mean, sig_dispersion;

  explicit EmissionSteps(double initial = 0.2) {
    for (auto *s : {&bg_mean, &bg_dispersion, &sig_mean, &sig_dispersion})
      s->scale = initial;
  }

  void adapt() {
    for (auto *s : {&bg_mean, &bg_dispersion, &sig_mean, &sig_dispersion})
      s->adapt();
  }
};

/// Sufficient statistics of one replicate given X and Z: counts assigned to
/// the background count component, to the signal, and the structural zeros.
struct EmissionStats {
  CountHistogram background;
  CountHistogram signal;
  double structural_zeros = 0.0;
};

namespace detail {

inline double truncated_gamma(double shape, double rate, double lo, double hi,
                              double fallback, Rng &rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double v = draw_gamma(shape, rate, rng);
    if (v > lo && v < hi)
      return v;
  }
  return fallback;
}

// Log-scale random walk; the Jacobian of the log transform is included.
template <class LogTarget>
double random_walk_log(double current, RandomWalkStep &step, LogTarget &&target,
                       Rng &rng) {
  const double prop = current * std::exp(step.scale * draw_normal(rng));
  const double cur_t = target(current);
  const double new_t = target(prop);
  bool ok = false;
  if (std::isfinite(new_t)) {
    const double log_ratio = new_t + std::log(prop) - cur_t - std::log(current);
    ok = log_ratio >= 0.0 || std::log(uniform01(rng)) < log_ratio;
  }
  step.record(ok);
  return ok ? prop : current;
}

} // namespace detail

/// One conjugate/Metropolis pass over the emission parameters of a replicate.
/// The signal mean is kept above the background mean.
inline ReplicateEmission update_emission(const ReplicateEmission &current,
                                         const EmissionStats &stats,
                                         std::span<const count_t> values,
                                         const PriorConfig &priors,
                                         EmissionSteps &steps, Rng &rng) {
  ReplicateEmission e = current;
  if (zero_inflated(e.family)) {
    const double p = draw_beta(priors.pi.a + stats.background.total,
                               priors.pi.b + stats.structural_zeros, rng);
    if (p > 0.0 && p <= 1.0)
      e.pi = p;
  }

  const auto &bg = stats.background;
  const auto &sg = stats.signal;
  if (!negative_binomial(e.family)) {
    const auto &g = priors.poisson_rate;
    e.bg_mean = detail::truncated_gamma(g.shape + bg.sum, g.rate + bg.total, 0.0,
                                        e.sig_mean, e.bg_mean, rng);
    e.sig_mean = detail::truncated_gamma(g.shape + sg.sum, g.rate + sg.total, e.bg_mean,
                                         std::numeric_limits<double>::infinity(),
                                         e.sig_mean, rng);
    return e;
  }

  const auto bounded = [](double v, double lo, double hi) { return v > lo && v < hi; };
  constexpr double inf = std::numeric_limits<double>::infinity();

  e.bg_mean = detail::random_walk_log(
      e.bg_mean, steps.bg_mean,
      [&](double mu) {
        if (!bounded(mu, 1e-10, e.sig_mean))
          return -inf;
        return nb_histogram_loglik_mean_part(bg, mu, e.bg_dispersion) +
               priors.nb_mean.logpdf(mu);
      },
      rng);
  e.bg_dispersion = detail::random_walk_log(
      e.bg_dispersion, steps.bg_dispersion,
      [&](double phi) {
        if (!bounded(phi, 1e-8, 1e8))
          return -inf;
        return nb_histogram_loglik(bg, values, e.bg_mean, phi) +
               priors.nb_dispersion.logpdf(phi);
      },
      rng);
  e.sig_mean = detail::random_walk_log(
      e.sig_mean, steps.sig_mean,
      [&](double mu) {
        if (!bounded(mu, e.bg_mean, 1e12))
          return -inf;
        return nb_histogram_loglik_mean_part(sg, mu, e.sig_dispersion) +
               priors.nb_mean.logpdf(mu);
      },
      rng);
  e.sig_dispersion = detail::random_walk_log(
      e.sig_dispersion, steps.sig_dispersion,
      [&](double phi) {
        if (!bounded(phi, 1e-8, 1e8))
          return -inf;
        return nb_histogram_loglik(sg, values, e.sig_mean, phi) +
               priors.nb_dispersion.logpdf(phi);
      },
      rng);
  return e;
}

/// Emission update from explicit per-bin states and zero indicators. Z is
/// read only where X = 0 and y = 0; positive counts always belong to the
/// count component.
inline ReplicateEmission update_emission_params(std::span<const count_t> y,
                                                std::span<const std::uint8_t> x,
                                                std::span<const std::uint8_t> z,
                                                const ReplicateEmission &current,
                                                const PriorConfig &priors,
                                                EmissionSteps &steps, Rng &rng) {
  if (y.size() != x.size() || y.size() != z.size())
    throw dimension_error("counts, states and zero indicators differ in length");
  const LevelCoding coding(y);
  EmissionStats st;
  st.background.reset(coding.n_levels());
  st.signal.reset(coding.n_levels());
  for (std::size_t m = 0; m < y.size(); ++m) {
    if (x[m])
      st.signal.weight[coding.level[m]] += 1.0;
    else if (y[m] > 0 || z[m] || !zero_inflated(current.family))
      st.background.weight[coding.level[m]] += 1.0;
    else
      st.structural_zeros += 1.0;
  }
  st.background.finalize(coding.values);
  st.signal.finalize(coding.values);
  return update_emission(current, st, coding.values, priors, steps, rng);
}

struct ConstrainedSteps {
  RandomWalkStep log_s;
  std::vector<RandomWalkStep> log_q0;

  ConstrainedSteps(std::size_t conditions, double initial) : log_q0(conditions) {
    log_s.scale = initial;
    for (auto &s : log_q0)
      s.scale = initial;
  }

  void adapt() {
    log_s.adapt();
    for (auto &s : log_q0)
      s.adapt();
  }
};

/// Log posterior kernel of the shared-s parameterization. The prior is the
/// image of the Beta priors on (q0c, q1c) with the change-of-variables factor
/// q0c (geometric mean over conditions), so that one condition reproduces
/// the unconstrained model exactly.
inline double constrained_logtarget(std::span<const TransitionCounts> counts,
                                    const ConstrainedChainParams &p,
                                    const PriorConfig &priors) {
  if (!feasible(p))
    return -std::numeric_limits<double>::infinity();
  const double C = static_cast<double>(counts.size());
  const double log_init1 = -std::log1p(p.s);
  const double log_init0 = std::log(p.s) - std::log1p(p.s);
  double t = 0.0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const auto &tc = counts[c];
    const double q0 = p.q0[c];
    const double q1 = 1.0 - p.s * q0;
    for (auto f : tc.first_states)
      t += f ? log_init1 : log_init0;
    t += tc.n11 * std::log(q1) + tc.n10 * std::log(p.s * q0) + tc.n01 * std::log(q0) +
         tc.n00 * std::log1p(-q0);
    t += beta_logpdf_kernel(q0, priors.q0) + beta_logpdf_kernel(q1, priors.q1) +
         std::log(q0) / C;
  }
  return t;
}

/// Random-walk Metropolis on log s, then on each log q0c; proposals leaving
/// the feasible region are rejected.
inline ConstrainedChainParams
update_constrained_params(std::span<const TransitionCounts> counts,
                          const ConstrainedChainParams &current,
                          const PriorConfig &priors, ConstrainedSteps &steps, Rng &rng) {
  if (counts.size() != current.q0.size())
    throw dimension_error("one transition summary per condition is required");
  ConstrainedChainParams p = current;
  double cur_t = constrained_logtarget(counts, p, priors);

  auto try_move = [&](double &slot, RandomWalkStep &step) {
    const double old = slot;
    slot = old * std::exp(step.scale * draw_normal(rng));
    const double new_t = constrained_logtarget(counts, p, priors);
    bool ok = false;
    if (std::isfinite(new_t)) {
      const double log_ratio = new_t + std::log(slot) - cur_t - std::log(old);
      ok = log_ratio >= 0.0 || std::log(uniform01(rng)) < log_ratio;
    }
    step.record(ok);
    if (ok)
      cur_t = new_t;
    else
      slot = old;
  };

  try_move(p.s, steps.log_s);
  for (std::size_t c = 0; c < p.q0.size(); ++c)
    try_move(p.q0[c], steps.log_q0[c]);
  return p;
}

// ---------------------------------------------------------------------------
// Exact enumeration oracle

inline constexpr std::size_t exact_posterior_max_bins = 14;

/// Exact P(X_m = 1 | Y) for one condition on one segment by summing the
/// joint over all 2^M latent configurations.
inline std::vector<double>
exact_posterior(std::span<const std::span<const count_t>> data,
                std::span<const ReplicateEmission> emissions, const ChainParams &q) {
  if (data.empty() || data.size() != emissions.size())
    throw dimension_error("one emission parameter set per replicate is required");
  const std::size_t M = data[0].size();
  if (M == 0 || M > exact_posterior_max_bins)
    throw invalid_parameter("exact enumeration supports 1.." +
                            std::to_string(exact_posterior_max_bins) + " bins");
  for (auto d : data)
    if (d.size() != M)
      throw dimension_error("replicates differ in length");
  validate(q);

  std::vector<double> l0(M, 0.0), l1(M, 0.0);
  for (std::size_t r = 0; r < data.size(); ++r)
    for (std::size_t m = 0; m < M; ++m) {
      l0[m] += emissions[r].log_background(data[r][m]);
      l1[m] += emissions[r].log_signal(data[r][m]);
    }

  constexpr double ninf = -std::numeric_limits<double>::infinity();
  double log_total = ninf;
  std::vector<double> log_on(M, ninf);
  std::vector<std::uint8_t> x(M);
  const Segment whole{0, M};
  for (std::uint64_t cfg = 0; cfg < (std::uint64_t{1} << M); ++cfg) {
    for (std::size_t m = 0; m < M; ++m)
      x[m] = (cfg >> m) & 1u;
    double lp = chain_logdensity(transition_counts(x, std::span(&whole, 1)), q);
    for (std::size_t m = 0; m < M; ++m)
      lp += x[m] ? l1[m] : l0[m];
    log_total = detail::log_sum_exp(log_total, lp);
    for (std::size_t m = 0; m < M; ++m)
      if (x[m])
        log_on[m] = detail::log_sum_exp(log_on[m], lp);
  }
  std::vector<double> post(M);
  for (std::size_t m = 0; m < M; ++m)
    post[m] = std::exp(log_on[m] - log_total);
  return post;
}

// ---------------------------------------------------------------------------
// Sampler

struct ParameterSummary {
  std::string name;
  double mean;
  double q025;
  double median;
  double q975;
};

/// Retained draws, one row per kept iteration.
struct Trace {
  std::vector<std::string> columns;
  std::vector<std::size_t> iterations;
  std::vector<std::vector<double>> rows;

  std::vector<double> column(const std::string &name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end())
      throw dimension_error("trace has no column '" + name + "'");
    const auto j = static_cast<std::size_t>(it - columns.begin());
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto &r : rows)
      v.push_back(r[j]);
    return v;
  }
};

struct PosteriorSummary {
  std::vector<std::string> conditions;
  std::vector<std::vector<double>> prob_enriched; // [condition][bin]
  std::vector<ParameterSummary> parameters;
  Trace trace;
  std::size_t retained = 0;
  std::vector<std::pair<std::string, double>> acceptance;

  const ParameterSummary &parameter(const std::string &name) const {
    for (const auto &p : parameters)
      if (p.name == name)
        return p;
    throw dimension_error("no parameter named '" + name + "'");
  }
};

inline double quantile(std::vector<double> v, double p) {
  if (v.empty())
    return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline std::vector<ParameterSummary> summarize(const Trace &t) {
  std::vector<ParameterSummary> out;
  for (const auto &name : t.columns) {
    const auto v = t.column(name);
    const double mean =
        v.empty() ? std::numeric_limits<double>::quiet_NaN()
                  : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    out.push_back({name, mean, quantile(v, 0.025), quantile(v, 0.5), quantile(v, 0.975)});
  }
  return out;
}

/// Metropolis-within-Gibbs over all conditions of a design. Replicates of a
/// condition share one latent profile; each replicate has its own emission
/// parameters.
class MrfSampler {
public:
  MrfSampler(const CountMatrix &data, const ExperimentDesign &design, Family family,
             PriorConfig priors, SamplerConfig cfg)
      : family_(family), priors_(priors), cfg_(cfg), segments_(data.segments()),
        chain_rng_(make_rng(cfg.seed, "chain")), constrained_steps_(0, priors.initial_step) {
    validate(priors_);
    validate(cfg_);
    const auto columns = resolve_design(design, data);
    if (data.n_bins() == 0)
      throw dimension_error("count matrix has no bins");
    bins_ = data.n_bins();

    for (std::size_t c = 0; c < design.conditions.size(); ++c) {
      const auto &cond = design.conditions[c];
      ConditionState cs;
      cs.label = cond.label;
      cs.latent_rng = make_rng(cfg.seed, "latent:" + cond.label);
      cs.chain_rng = make_rng(cfg.seed, "chain:" + cond.label);

      // canonical replicate order: by column label
      std::vector<std::size_t> order(columns[c].size());
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return cond.replicates[a] < cond.replicates[b];
      });
      cs.design_to_canonical.resize(order.size());
      std::vector<std::span<const count_t>> cols;
      for (std::size_t k = 0; k < order.size(); ++k) {
        cs.design_to_canonical[order[k]] = k;
        const auto col = data.column(columns[c][order[k]]);
        cols.push_back(col);
        cs.reps.emplace_back(cond.replicates[order[k]], col, priors.initial_step, cfg.seed);
      }
      const auto ws = warm_start(cols, segments_, family_);
      cs.x = ws.states;
      cs.chain = ws.chain;
      for (std::size_t k = 0; k < cs.reps.size(); ++k)
        cs.reps[k].emission = ws.emissions[k];
      cs.log_ratio.assign(bins_, 0.0);
      cs.hits.assign(bins_, 0);
      conditions_.push_back(std::move(cs));
    }

    if (cfg_.constrained) {
      // shared s from the geometric mean of the per-condition warm starts
      double log_s = 0.0;
      for (const auto &cs : conditions_)
        log_s += std::log((1.0 - cs.chain.q1) / cs.chain.q0);
      constrained_.s = std::exp(log_s / static_cast<double>(conditions_.size()));
      for (const auto &cs : conditions_)
        constrained_.q0.push_back(std::min(cs.chain.q0, 0.5 / constrained_.s));
      constrained_steps_ = ConstrainedSteps(conditions_.size(), priors_.initial_step);
      sync_constrained();
    }
  }

  std::size_t n_conditions() const { return conditions_.size(); }
  std::size_t n_bins() const { return bins_; }

  const std::vector<std::uint8_t> &states(std::size_t c) const { return conditions_.at(c).x; }
  void set_states(std::size_t c, std::vector<std::uint8_t> x) {
    if (x.size() != bins_)
      throw dimension_error("state vector length differs from the bin count");
    conditions_.at(c).x = std::move(x);
  }

  /// Emission parameters in design replicate order.
  std::vector<ReplicateEmission> emissions(std::size_t c) const {
    const auto &cs = conditions_.at(c);
    std::vector<ReplicateEmission> out;
    for (auto k : cs.design_to_canonical)
      out.push_back(cs.reps[k].emission);
    return out;
  }

  void set_emissions(std::size_t c, std::span<const ReplicateEmission> e) {
    auto &cs = conditions_.at(c);
    if (e.size() != cs.reps.size())
      throw dimension_error("one emission parameter set per replicate is required");
    for (std::size_t r = 0; r < e.size(); ++r) {
      validate(e[r]);
      if (e[r].family != family_)
        throw invalid_parameter("emission family differs from the sampler family");
      cs.reps[cs.design_to_canonical[r]].emission = e[r];
    }
  }

  ChainParams chain(std::size_t c) const { return conditions_.at(c).chain; }
  void set_chain(std::size_t c, const ChainParams &q) {
    validate(q);
    conditions_.at(c).chain = q;
  }

  const ConstrainedChainParams &constrained() const { return constrained_; }
  void set_constrained(const ConstrainedChainParams &p) {
    if (!cfg_.constrained)
      throw invalid_parameter("sampler was not configured for the constrained model");
    if (p.q0.size() != conditions_.size() || !feasible(p))
      throw invalid_parameter("constrained chain parameters are infeasible");
    constrained_ = p;
    sync_constrained();
  }

  /// Systematic left-to-right scan of the latent states of one condition.
  void sweep_latent(std::size_t c) {
    auto &cs = conditions_.at(c);
    refresh_log_ratio(cs);
    const ChainParams &q = cs.chain;
    // logit prior indexed by [prev][next], 2 = no neighbour
    double prior_logit[3][3];
    for (int prev = 0; prev < 3; ++prev)
      for (int next = 0; next < 3; ++next) {
        auto side = [&](int i) {
          double l = prev == 2 ? log_initial(q, i) : log_transition(q, prev, i);
          if (next != 2)
            l += log_transition(q, i, next);
          return l;
        };
        prior_logit[prev][next] = side(1) - side(0);
      }
    auto &x = cs.x;
    const double *ratio = cs.log_ratio.data();
    for (const auto &seg : segments_) {
      for (std::size_t m = seg.begin; m < seg.end; ++m) {
        const int prev = m == seg.begin ? 2 : x[m - 1];
        const int next = m + 1 < seg.end ? x[m + 1] : 2;
        const double logit = prior_logit[prev][next] + ratio[m];
        // u < 1 / (1 + exp(-logit))
        x[m] = uniform01(cs.latent_rng) * (1.0 + std::exp(-logit)) < 1.0;
      }
    }
  }

  /// Draws the zero indicators (aggregated per count level) and then the
  /// emission parameters of every replicate of one condition.
  void update_emissions(std::size_t c) {
    auto &cs = conditions_.at(c);
    for (auto &rs : cs.reps) {
      const std::size_t L = rs.coding.n_levels();
      EmissionStats &st = rs.stats;
      st.background.reset(L);
      st.signal.reset(L);
      st.structural_zeros = 0.0;
      const auto &level = rs.coding.level;
      // integer tallies, converted once
      rs.tally_bg.assign(L, 0);
      rs.tally_sig.assign(L, 0);
      for (std::size_t m = 0; m < bins_; ++m)
        (cs.x[m] ? rs.tally_sig : rs.tally_bg)[level[m]] += 1;
      for (std::size_t l = 0; l < L; ++l) {
        st.background.weight[l] = static_cast<double>(rs.tally_bg[l]);
        st.signal.weight[l] = static_cast<double>(rs.tally_sig[l]);
      }
      if (zero_inflated(family_) && rs.coding.has_zero()) {
        // Z at background zeros is conditionally i.i.d. Bernoulli, so the
        // number of count-component zeros is Binomial.
        const auto zeros = rs.tally_bg[0];
        const auto kept = draw_binomial(zeros, z_full_conditional(0, rs.emission), rs.rng);
        st.background.weight[0] = static_cast<double>(kept);
        st.structural_zeros = static_cast<double>(zeros - kept);
      }
      st.background.finalize(rs.coding.values);
      st.signal.finalize(rs.coding.values);
      rs.emission = update_emission(rs.emission, st, rs.coding.values, priors_, rs.steps, rs.rng);
    }
  }

  void update_chains() {
    if (!cfg_.constrained) {
      for (auto &cs : conditions_) {
        const auto tc = transition_counts(cs.x, segments_);
        const auto u = update_transition_params(tc, cs.chain, priors_, cs.chain_rng);
        cs.chain = u.params;
        ++chain_proposals_;
        chain_accepts_ += u.accepted;
      }
      return;
    }
    std::vector<TransitionCounts> tcs;
    for (const auto &cs : conditions_)
      tcs.push_back(transition_counts(cs.x, segments_));
    constrained_ = update_constrained_params(tcs, constrained_, priors_, constrained_steps_,
                                             chain_rng_);
    sync_constrained();
  }

  void iterate() {
    for (std::size_t c = 0; c < conditions_.size(); ++c) {
      sweep_latent(c);
      if (!cfg_.hold_parameters)
        update_emissions(c);
    }
    if (!cfg_.hold_parameters)
      update_chains();
  }

  PosteriorSummary run() {
    PosteriorSummary out;
    out.trace.columns = trace_columns();
    const std::size_t kept = (cfg_.iterations - cfg_.burn_in + cfg_.thinning - 1) / cfg_.thinning;
    out.trace.rows.reserve(kept);
    out.trace.iterations.reserve(kept);
    for (auto &cs : conditions_)
      std::fill(cs.hits.begin(), cs.hits.end(), 0u);

    for (std::size_t it = 0; it < cfg_.iterations; ++it) {
      iterate();
      if (it < cfg_.burn_in) {
        if ((it + 1) % cfg_.adapt_every == 0)
          adapt();
        continue;
      }
      if ((it - cfg_.burn_in) % cfg_.thinning != 0)
        continue;
      for (auto &cs : conditions_)
        for (std::size_t m = 0; m < bins_; ++m)
          cs.hits[m] += cs.x[m];
      ++out.retained;
      out.trace.iterations.push_back(it + 1);
      out.trace.rows.push_back(trace_row());
    }

    for (const auto &cs : conditions_) {
      out.conditions.push_back(cs.label);
      std::vector<double> p(bins_);
      for (std::size_t m = 0; m < bins_; ++m)
        p[m] = static_cast<double>(cs.hits[m]) / static_cast<double>(out.retained);
      out.prob_enriched.push_back(std::move(p));
    }
    out.parameters = summarize(out.trace);
    out.acceptance = acceptance_rates();
    return out;
  }

private:
  struct ReplicateState {
    ReplicateState(std::string name, std::span<const count_t> col, double step,
                   std::uint64_t seed)
        : label(std::move(name)), coding(col), steps(step),
          rng(make_rng(seed, "replicate:" + label)) {}

    std::string label;
    LevelCoding coding;
    std::vector<double> ratio_table;
    std::vector<std::uint64_t> tally_bg, tally_sig;
    EmissionStats stats;
    EmissionSteps steps;
    Rng rng;
    ReplicateEmission emission;
  };

  struct ConditionState {
    std::string label;
    std::vector<ReplicateState> reps; // canonical order
    std::vector<std::size_t> design_to_canonical;
    std::vector<std::uint8_t> x;
    std::vector<double> log_ratio;
    std::vector<std::uint32_t> hits;
    ChainParams chain{0.5, 0.5};
    Rng latent_rng;
    Rng chain_rng;
  };

  void refresh_log_ratio(ConditionState &cs) {
    bool first = true;
    for (auto &rs : cs.reps) {
      const auto &v = rs.coding.values;
      rs.ratio_table.resize(v.size());
      for (std::size_t l = 0; l < v.size(); ++l) {
        const double d = rs.emission.log_signal(v[l]) - rs.emission.log_background(v[l]);
        if (!std::isfinite(d))
          throw fit_failure("non-finite emission log-likelihood for replicate '" + rs.label +
                            "' at count " + std::to_string(v[l]) + " (pi=" +
                            std::to_string(rs.emission.pi) + ", background mean=" +
                            std::to_string(rs.emission.bg_mean) + ", signal mean=" +
                            std::to_string(rs.emission.sig_mean) + ")");
        rs.ratio_table[l] = d;
      }
      const double *table = rs.ratio_table.data();
      const std::uint32_t *level = rs.coding.level.data();
      double *out = cs.log_ratio.data();
      if (first) {
        for (std::size_t m = 0; m < bins_; ++m)
          out[m] = table[level[m]];
        first = false;
      } else {
        for (std::size_t m = 0; m < bins_; ++m)
          out[m] += table[level[m]];
      }
    }
  }

  void sync_constrained() {
    for (std::size_t c = 0; c < conditions_.size(); ++c)
      conditions_[c].chain = constrained_.for_condition(c);
  }

  void adapt() {
    for (auto &cs : conditions_)
      for (auto &rs : cs.reps)
        rs.steps.adapt();
    constrained_steps_.adapt();
  }

  std::vector<std::string> trace_columns() const {
    std::vector<std::string> cols;
    if (cfg_.constrained)
      cols.push_back("s");
    for (const auto &cs : conditions_) {
      cols.push_back(cs.label + ".q0");
      cols.push_back(cs.label + ".q1");
      cols.push_back(cs.label + ".stationary");
      for (auto k : cs.design_to_canonical) {
        const auto &l = cs.reps[k].label;
        if (zero_inflated(family_))
          cols.push_back(l + ".pi");
        cols.push_back(l + ".bg_mean");
        if (negative_binomial(family_))
          cols.push_back(l + ".bg_dispersion");
        cols.push_back(l + ".sig_mean");
        if (negative_binomial(family_))
          cols.push_back(l + ".sig_dispersion");
      }
    }
    return cols;
  }

  std::vector<double> trace_row() const {
    std::vector<double> row;
    if (cfg_.constrained)
      row.push_back(constrained_.s);
    for (const auto &cs : conditions_) {
      row.push_back(cs.chain.q0);
      row.push_back(cs.chain.q1);
      row.push_back(stationary_prob(cs.chain));
      for (auto k : cs.design_to_canonical) {
        const auto &e = cs.reps[k].emission;
        if (zero_inflated(family_))
          row.push_back(e.pi);
        row.push_back(e.bg_mean);
        if (negative_binomial(family_))
          row.push_back(e.bg_dispersion);
        row.push_back(e.sig_mean);
        if (negative_binomial(family_))
          row.push_back(e.sig_dispersion);
      }
    }
    return row;
  }

  std::vector<std::pair<std::string, double>> acceptance_rates() const {
    std::vector<std::pair<std::string, double>> out;
    if (cfg_.hold_parameters)
      return out;
    if (cfg_.constrained) {
      out.emplace_back("s", constrained_steps_.log_s.acceptance());
      for (std::size_t c = 0; c < conditions_.size(); ++c)
        out.emplace_back(conditions_[c].label + ".q0", constrained_steps_.log_q0[c].acceptance());
    } else {
      out.emplace_back("transitions", chain_proposals_ ? static_cast<double>(chain_accepts_) /
                                                             static_cast<double>(chain_proposals_)
                                                       : 0.0);
    }
    if (negative_binomial(family_))
      for (const auto &cs : conditions_)
        for (auto k : cs.design_to_canonical) {
          const auto &rs = cs.reps[k];
          out.emplace_back(rs.label + ".bg_mean", rs.steps.bg_mean.acceptance());
          out.emplace_back(rs.label + ".bg_dispersion", rs.steps.bg_dispersion.acceptance());
          out.emplace_back(rs.label + ".sig_mean", rs.steps.sig_mean.acceptance());
          out.emplace_back(rs.label + ".sig_dispersion", rs.steps.sig_dispersion.acceptance());
        }
    return out;
  }

  Family family_;
  PriorConfig priors_;
  SamplerConfig cfg_;
  std::vector<Segment> segments_;
  std::size_t bins_ = 0;
  std::vector<ConditionState> conditions_;
  Rng chain_rng_;
  ConstrainedChainParams constrained_{1.0, {}};
  ConstrainedSteps constrained_steps_;
  std::size_t chain_proposals_ = 0;
  std::size_t chain_accepts_ = 0;
};

inline PosteriorSummary run_sampler(const CountMatrix &data, const ExperimentDesign &design,
                                    Family family, const PriorConfig &priors,
                                    const SamplerConfig &cfg) {
  MrfSampler sampler(data, design, family, priors, cfg);
  return sampler.run();
}

} // namespace chipmrf

#endif
