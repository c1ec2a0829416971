#ifndef CHIPMRF_SIMEVAL_HPP
#define CHIPMRF_SIMEVAL_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "calling.hpp"
#include "chain.hpp"
#include "data.hpp"
#include "distributions.hpp"
#include "error.hpp"
#include "inference.hpp"
#include "mixture.hpp"
#include "model.hpp"
#include "random.hpp"

namespace chipmrf {

enum class LatentKind { markov, bernoulli };

struct Scenario {
  std::string name = "scenario";
  LatentKind latent = LatentKind::markov;
  ChainParams chain{0.02, 0.5}; // markov
  double p = 0.0;               // bernoulli
  Family family = Family::zinb_nb;
  std::vector<ReplicateEmission> replicates;
  std::size_t bins = 10000;
};

inline void validate(const Scenario &s) {
  if (s.bins < 1)
    throw invalid_parameter("scenario needs at least one bin");
  if (s.replicates.empty())
    throw invalid_parameter("scenario needs at least one replicate");
  if (s.latent == LatentKind::markov)
    validate(s.chain);
  else if (!(s.p >= 0.0 && s.p <= 1.0))
    throw invalid_parameter("Bernoulli enrichment probability must lie in [0,1]");
  for (const auto &e : s.replicates) {
    if (e.family != s.family)
      throw invalid_parameter("replicate family differs from the scenario family");
    validate(e);
  }
}

/// Named simulation settings: scenarioK-less and scenarioK-more for K = 1..6,
/// the less and more efficient experiment of each setting.
inline std::vector<std::string> builtin_scenario_names() {
  std::vector<std::string> out;
  for (int k = 1; k <= 6; ++k)
    for (const char *eff : {"less", "more"})
      out.push_back("scenario" + std::to_string(k) + "-" + eff);
  return out;
}

inline Scenario builtin_scenario(const std::string &name) {
  using F = Family;
  const auto zinb = [](double pi, double bm, double bd, double sm, double sd) {
    return ReplicateEmission{F::zinb_nb, pi, bm, bd, sm, sd};
  };
  const auto pois = [](double bm, double sm) {
    return ReplicateEmission{F::poisson_poisson, 1.0, bm, 1.0, sm, 1.0};
  };
  Scenario s;
  s.name = name;
  s.bins = 10000;
  if (name == "scenario1-less") {
    s.chain = {0.002, 0.940};
    s.replicates = {zinb(0.66, 0.33, 2.01, 1.38, 2.07)};
  } else if (name == "scenario1-more") {
    s.chain = {0.003, 0.866};
    s.replicates = {zinb(0.53, 0.36, 0.88, 6.95, 0.89)};
  } else if (name == "scenario2-less" || name == "scenario2-more") {
    s.family = F::poisson_poisson;
    s.chain = {0.02, 0.98};
    s.replicates = {pois(0.5, name.ends_with("less") ? 1.5 : 9.0)};
  } else if (name == "scenario3-less") {
    s.family = F::poisson_poisson;
    s.chain = {0.02, 0.5};
    s.replicates = {pois(0.5, 3.0)};
  } else if (name == "scenario3-more") {
    s.family = F::poisson_poisson;
    s.chain = {0.02, 0.5};
    s.replicates = {pois(0.2, 6.0)};
  } else if (name == "scenario4-less" || name == "scenario4-more") {
    s.chain = {0.02, 0.98};
    s.replicates = {zinb(0.5, 0.5, 0.5, name.ends_with("less") ? 3.0 : 6.0, 1.0)};
  } else if (name == "scenario5-less" || name == "scenario6-less") {
    s.chain = {0.003, 0.839};
    s.replicates = {zinb(0.634, 0.430, 2.322, 2.738, 1.548),
                    zinb(0.481, 0.477, 1.246, 5.991, 0.957)};
    if (name.starts_with("scenario6")) {
      s.latent = LatentKind::bernoulli;
      s.p = 0.017;
    }
  } else if (name == "scenario5-more" || name == "scenario6-more") {
    s.chain = {0.003, 0.830};
    s.replicates = {zinb(0.656, 0.393, 3.014, 3.797, 1.139),
                    zinb(0.486, 0.395, 1.061, 7.392, 0.955)};
    if (name.starts_with("scenario6")) {
      s.latent = LatentKind::bernoulli;
      s.p = 0.020;
    }
  } else {
    throw invalid_parameter("unknown scenario '" + name + "'");
  }
  return s;
}

struct SimulatedData {
  LatentChain truth;
  CountMatrix data;
};

inline std::vector<Bin> simulation_bins(std::size_t n, std::uint64_t width = 200) {
  return tile_bins("sim", n * width, width);
}

inline std::vector<std::uint8_t> draw_latent(const Scenario &s, Rng &rng) {
  if (s.latent == LatentKind::markov)
    return sample_chain(s.bins, s.chain, rng).states;
  std::vector<std::uint8_t> x(s.bins);
  for (auto &v : x)
    v = uniform01(rng) < s.p ? 1 : 0;
  return x;
}

inline std::vector<count_t> emit(std::span<const std::uint8_t> truth,
                                 const ReplicateEmission &e, Rng &rng) {
  const auto bg = e.background();
  const auto sg = e.signal();
  std::vector<count_t> y(truth.size());
  for (std::size_t m = 0; m < truth.size(); ++m)
    y[m] = sample_one(truth[m] ? sg : bg, rng);
  return y;
}

/// Replicates share the latent profile; counts are drawn replicate by
/// replicate from the scenario emissions.
inline SimulatedData generate(const Scenario &s, Rng &rng,
                              const std::string &label_prefix = "rep") {
  validate(s);
  SimulatedData out;
  out.truth = LatentChain::single(draw_latent(s, rng));
  out.data = CountMatrix(simulation_bins(s.bins), {});
  for (std::size_t r = 0; r < s.replicates.size(); ++r)
    out.data.add_column(label_prefix + std::to_string(r + 1),
                        emit(out.truth.states, s.replicates[r], rng));
  return out;
}

struct TwoConditionData {
  LatentChain truth1;
  LatentChain truth2;
  CountMatrix data;
  ExperimentDesign design;
  std::size_t differential = 0;
};

/// Two conditions with the scenario emissions. The second profile copies the
/// first, then loses whole enriched runs and gains runs taken from an
/// independent draw until exactly `n_diff` bins disagree.
inline TwoConditionData generate_two_conditions(const Scenario &s, std::size_t n_diff,
                                                Rng &rng) {
  validate(s);
  TwoConditionData out;
  auto x1 = draw_latent(s, rng);
  auto x2 = x1;
  const auto other = draw_latent(s, rng);
  const std::size_t M = x1.size();

  struct Run {
    std::size_t begin, end;
  };
  auto runs_of = [&](const std::vector<std::uint8_t> &x) {
    std::vector<Run> r;
    for (std::size_t m = 0; m < M; ++m)
      if (x[m] && (m == 0 || !x[m - 1]))
        r.push_back({m, m});
    for (auto &run : r) {
      run.end = run.begin;
      while (run.end < M && x[run.end])
        ++run.end;
    }
    return r;
  };
  auto losses = runs_of(x1);
  auto gains = runs_of(other);
  std::shuffle(losses.begin(), losses.end(), rng);
  std::shuffle(gains.begin(), gains.end(), rng);

  std::size_t changed = 0;
  std::size_t li = 0, gi = 0;
  bool take_loss = true;
  while (changed < n_diff && (li < losses.size() || gi < gains.size())) {
    const bool use_loss = (take_loss && li < losses.size()) || gi >= gains.size();
    take_loss = !take_loss;
    if (use_loss) {
      const auto run = losses[li++];
      for (std::size_t m = run.begin; m < run.end && changed < n_diff; ++m)
        if (x2[m] && x1[m]) {
          x2[m] = 0;
          ++changed;
        }
    } else {
      const auto run = gains[gi++];
      for (std::size_t m = run.begin; m < run.end && changed < n_diff; ++m)
        if (!x1[m] && !x2[m]) {
          x2[m] = 1;
          ++changed;
        }
    }
  }
  out.differential = changed;

  out.data = CountMatrix(simulation_bins(M), {});
  Condition c1{"cond1", "", {}}, c2{"cond2", "", {}};
  for (std::size_t r = 0; r < s.replicates.size(); ++r) {
    const auto l1 = "cond1.rep" + std::to_string(r + 1);
    out.data.add_column(l1, emit(x1, s.replicates[r], rng));
    c1.replicates.push_back(l1);
  }
  for (std::size_t r = 0; r < s.replicates.size(); ++r) {
    const auto l2 = "cond2.rep" + std::to_string(r + 1);
    out.data.add_column(l2, emit(x2, s.replicates[r], rng));
    c2.replicates.push_back(l2);
  }
  out.design.conditions = {c1, c2};
  out.truth1 = LatentChain::single(std::move(x1));
  out.truth2 = LatentChain::single(std::move(x2));
  return out;
}

struct EvalResult {
  double fndr = 0.0;
  double realized_fdr = 0.0;
  std::size_t called = 0;
  std::size_t not_called = 0;
  std::size_t missed = 0;      // truly enriched, not called
  std::size_t false_calls = 0; // truly background, called
};

/// FNDR = missed / not called; FDR = false calls / max(called, 1).
inline EvalResult score(std::span<const std::uint8_t> truth,
                        std::span<const std::size_t> called) {
  std::vector<std::uint8_t> flag(truth.size(), 0);
  for (auto m : called) {
    if (m >= truth.size())
      throw dimension_error("called bin index out of range");
    flag[m] = 1;
  }
  EvalResult r;
  for (std::size_t m = 0; m < truth.size(); ++m) {
    if (flag[m]) {
      ++r.called;
      r.false_calls += truth[m] == 0;
    } else {
      ++r.not_called;
      r.missed += truth[m] == 1;
    }
  }
  r.fndr = r.not_called ? static_cast<double>(r.missed) / static_cast<double>(r.not_called) : 0.0;
  r.realized_fdr = static_cast<double>(r.false_calls) /
                   static_cast<double>(std::max<std::size_t>(r.called, 1));
  return r;
}

/// Welch two-sample test of mean(a) < mean(b); returns the one-sided p-value.
inline double t_test_one_sided(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw invalid_parameter("t-test needs at least two values per group");
  auto stats = [](std::span<const double> v) {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v)
      ss += (x - mean) * (x - mean);
    return std::pair{mean, ss / (n - 1.0)};
  };
  const auto [ma, va] = stats(a);
  const auto [mb, vb] = stats(b);
  const double sa = va / static_cast<double>(a.size());
  const double sb = vb / static_cast<double>(b.size());
  const double se2 = sa + sb;
  if (!(se2 > 0.0)) {
    if (ma == mb)
      throw degenerate_input("both groups have zero variance and equal means");
    throw degenerate_input("both groups have zero variance");
  }
  const double t = (ma - mb) / std::sqrt(se2);
  const double df = se2 * se2 /
                    (sa * sa / static_cast<double>(a.size() - 1) +
                     sb * sb / static_cast<double>(b.size() - 1));
  boost::math::students_t dist(df);
  return boost::math::cdf(dist, t);
}

enum class Method { mrf, mixture };

inline std::string to_string(Method m) { return m == Method::mrf ? "MRF" : "Mixture"; }

inline Method parse_method(const std::string &s) {
  if (s == "mrf" || s == "MRF")
    return Method::mrf;
  if (s == "mixture" || s == "mix" || s == "Mixture")
    return Method::mixture;
  throw invalid_parameter("unknown method '" + s + "' (expected mrf or mixture)");
}

struct BenchmarkConfig {
  std::size_t reps = 20;
  std::vector<Method> methods{Method::mrf, Method::mixture};
  double alpha = 0.05;
  std::uint64_t seed = 1;
  SamplerConfig sampler;
  EmOptions em;
  std::size_t threads = 1;
};

struct MethodResult {
  Method method;
  std::vector<std::size_t> rep; // repetition index of each entry below
  std::vector<double> fndr;
  std::vector<double> fdr;
  std::vector<double> called;
  std::vector<std::string> failures; // "rep <i>: <message>"

  double mean_fndr() const { return mean_of(fndr); }
  double mean_fdr() const { return mean_of(fdr); }
  double mean_called() const { return mean_of(called); }

  static double mean_of(const std::vector<double> &v) {
    return v.empty() ? std::numeric_limits<double>::quiet_NaN()
                     : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  }
};

struct BenchmarkResult {
  std::string scenario;
  std::size_t reps = 0;
  double alpha = 0.05;
  std::vector<MethodResult> methods;
  // one-sided p-value that the first method's FNDR is lower, per other method
  std::vector<std::optional<double>> p_values;
};

namespace detail {

struct RepOutcome {
  std::vector<std::optional<EvalResult>> per_method;
  std::vector<std::string> errors;
};

inline RepOutcome run_one_rep(const Scenario &scn, const BenchmarkConfig &cfg, std::size_t rep) {
  Rng rng(derive_seed(cfg.seed, rep));
  const auto sim = generate(scn, rng);
  const auto design = ExperimentDesign::pooled(sim.data);
  RepOutcome out;
  out.per_method.resize(cfg.methods.size());
  out.errors.resize(cfg.methods.size());
  for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
    try {
      std::vector<double> post;
      if (cfg.methods[k] == Method::mrf) {
        auto sc = cfg.sampler;
        sc.seed = derive_seed(cfg.seed ^ 0x5eedULL, rep);
        post = run_sampler(sim.data, design, scn.family, PriorConfig{}, sc).prob_enriched[0];
      } else {
        post = fit_em(sim.data, design, scn.family, cfg.em)[0].responsibilities;
      }
      const auto call = fdr_call(post, cfg.alpha);
      out.per_method[k] = score(sim.truth.states, call.called);
    } catch (const std::exception &e) {
      out.errors[k] = e.what();
    }
  }
  return out;
}

} // namespace detail

/// Repeated generate / fit / call / score. Repetitions use seeds derived
/// from (seed, repetition index) and are reduced in index order, so the
/// table does not depend on the thread count.
inline BenchmarkResult run_benchmark(const Scenario &scn, const BenchmarkConfig &cfg) {
  validate(scn);
  if (cfg.reps < 2)
    throw invalid_parameter("benchmark needs at least two repetitions");
  if (cfg.methods.empty())
    throw invalid_parameter("benchmark needs at least one method");

  std::vector<detail::RepOutcome> outcomes(cfg.reps);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cfg.reps; i = next++)
      outcomes[i] = detail::run_one_rep(scn, cfg, i);
  };
  const std::size_t nthreads = std::clamp<std::size_t>(cfg.threads, 1, cfg.reps);
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < nthreads; ++t)
      pool.emplace_back(worker);
  }

  BenchmarkResult res;
  res.scenario = scn.name;
  res.reps = cfg.reps;
  res.alpha = cfg.alpha;
  for (auto m : cfg.methods)
    res.methods.push_back({m, {}, {}, {}, {}, {}});
  for (std::size_t i = 0; i < cfg.reps; ++i)
    for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
      auto &mr = res.methods[k];
      if (const auto &ev = outcomes[i].per_method[k]) {
        mr.rep.push_back(i);
        mr.fndr.push_back(ev->fndr);
        mr.fdr.push_back(ev->realized_fdr);
        mr.called.push_back(static_cast<double>(ev->called));
      } else {
        mr.failures.push_back("rep " + std::to_string(i) + ": " + outcomes[i].errors[k]);
      }
    }
  for (std::size_t k = 1; k < res.methods.size(); ++k) {
    std::optional<double> p;
    try {
      p = t_test_one_sided(res.methods[0].fndr, res.methods[k].fndr);
    } catch (const error &) {
    }
    res.p_values.push_back(p);
  }
  return res;
}

inline std::string format_number(double v) {
  if (std::isnan(v))
    return "NA";
  std::ostringstream os;
  os << std::setprecision(4);
  if (v != 0.0 && std::abs(v) < 1e-3)
    os << std::scientific;
  os << v;
  return os.str();
}

/// Aligned text table: one row per method with mean FNDR and the one-sided
/// p-value against the first method.
inline void write_benchmark_text(std::ostream &os, const BenchmarkResult &r) {
  os << "scenario: " << r.scenario << "  reps: " << r.reps << "  fdr: " << r.alpha << "\n";
  os << std::left << std::setw(10) << "method" << std::right << std::setw(12) << "FNDR"
     << std::setw(12) << "p-value" << std::setw(12) << "FDR" << std::setw(10) << "called"
     << std::setw(10) << "failed" << "\n";
  for (std::size_t k = 0; k < r.methods.size(); ++k) {
    const auto &m = r.methods[k];
    std::string p = "-";
    if (k > 0)
      p = r.p_values[k - 1] ? format_number(*r.p_values[k - 1]) : "NA";
    os << std::left << std::setw(10) << to_string(m.method) << std::right << std::setw(12)
       << format_number(m.mean_fndr()) << std::setw(12) << p << std::setw(12)
       << format_number(m.mean_fdr()) << std::setw(10) << format_number(m.mean_called())
       << std::setw(10) << m.failures.size() << "\n";
  }
}

/// Tab-separated per-repetition table.
inline void write_benchmark_tsv(std::ostream &os, const BenchmarkResult &r) {
  os << "method\trep\tfndr\tfdr\tcalled\n";
  for (const auto &m : r.methods)
    for (std::size_t i = 0; i < m.fndr.size(); ++i)
      os << to_string(m.method) << '\t' << m.rep[i] << '\t' << m.fndr[i] << '\t' << m.fdr[i] << '\t'
         << m.called[i] << '\n';
}

} // namespace chipmrf

#endif
