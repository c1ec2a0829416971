#include <cmath>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "chipmrf/simeval.hpp"

using namespace chipmrf;

namespace {

using Idx = std::vector<std::size_t>;

BenchmarkConfig quick_config(std::size_t reps) {
  BenchmarkConfig cfg;
  cfg.reps = reps;
  cfg.sampler.iterations = 600;
  cfg.sampler.burn_in = 300;
  cfg.seed = 21;
  return cfg;
}

} // namespace

TEST(Scenarios, AllPresetsValid) {
  for (const auto &name : builtin_scenario_names()) {
    const auto s = builtin_scenario(name);
    EXPECT_NO_THROW(validate(s)) << name;
    EXPECT_EQ(s.bins, 10000u);
  }
  EXPECT_THROW(builtin_scenario("scenario7-less"), invalid_parameter);
  EXPECT_EQ(builtin_scenario("scenario5-less").replicates.size(), 2u);
  EXPECT_EQ(builtin_scenario("scenario6-more").latent, LatentKind::bernoulli);
}

TEST(Generate, SymmetricChainHalfEnriched) {
  auto s = builtin_scenario("scenario2-less");
  s.bins = 100000;
  Rng rng(1);
  const auto sim = generate(s, rng);
  const double frac =
      std::accumulate(sim.truth.states.begin(), sim.truth.states.end(), 0.0) / s.bins;
  // lag-k autocorrelation (q1 - q0)^k inflates the variance of the mean
  const double rho = s.chain.q1 - s.chain.q0;
  const double se = std::sqrt(0.25 / s.bins * (1 + rho) / (1 - rho));
  EXPECT_NEAR(frac, 0.5, 3 * se);
}

TEST(Generate, BernoulliZeroIsAllBackground) {
  auto s = builtin_scenario("scenario6-less");
  s.p = 0.0;
  Rng rng(2);
  const auto sim = generate(s, rng);
  for (auto x : sim.truth.states)
    EXPECT_EQ(x, 0);
  // background only: mean count near the background mean of each replicate
  for (std::size_t r = 0; r < s.replicates.size(); ++r) {
    const auto col = sim.data.column(r);
    const double mean = std::accumulate(col.begin(), col.end(), 0.0) / col.size();
    EXPECT_NEAR(mean, s.replicates[r].pi * s.replicates[r].bg_mean, 0.05);
  }
}

TEST(Generate, ReplicatesShareTruth) {
  const auto s = builtin_scenario("scenario5-less");
  Rng rng(3);
  const auto sim = generate(s, rng);
  EXPECT_EQ(sim.truth.size(), s.bins);
  EXPECT_EQ(sim.data.n_columns(), 2u);
  EXPECT_EQ(sim.data.labels(), (std::vector<std::string>{"rep1", "rep2"}));
  // the same latent profile drives both columns: enriched bins are high in both
  for (std::size_t r = 0; r < 2; ++r) {
    double on = 0, off = 0, n_on = 0, n_off = 0;
    const auto col = sim.data.column(r);
    for (std::size_t m = 0; m < s.bins; ++m)
      (sim.truth.states[m] ? on : off) += col[m], (sim.truth.states[m] ? n_on : n_off) += 1;
    EXPECT_GT(on / n_on, 2 * off / n_off);
  }
}

TEST(Generate, Deterministic) {
  const auto s = builtin_scenario("scenario1-more");
  Rng a(4), b(4);
  const auto x = generate(s, a), y = generate(s, b);
  EXPECT_EQ(x.truth.states, y.truth.states);
  EXPECT_TRUE(std::ranges::equal(x.data.column(0), y.data.column(0)));
}

TEST(GenerateTwoConditions, ExactDifferentialCount) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const auto d = generate_two_conditions(builtin_scenario("scenario5-less"), 100, rng);
    std::size_t diff = 0;
    for (std::size_t m = 0; m < d.truth1.size(); ++m)
      diff += d.truth1.states[m] != d.truth2.states[m];
    EXPECT_EQ(diff, 100u);
    EXPECT_EQ(d.differential, 100u);
    EXPECT_EQ(d.data.n_columns(), 4u);
    ASSERT_EQ(d.design.conditions.size(), 2u);
    EXPECT_EQ(d.design.conditions[1].replicates,
              (std::vector<std::string>{"cond2.rep1", "cond2.rep2"}));
  }
}

TEST(Score, Examples) {
  std::vector<std::uint8_t> truth(10000, 0);
  for (std::size_t m = 0; m < 100; ++m)
    truth[m * 100] = 1;
  EXPECT_DOUBLE_EQ(score(truth, Idx{}).fndr, 0.01);

  Idx perfect;
  for (std::size_t m = 0; m < 100; ++m)
    perfect.push_back(m * 100);
  const auto p = score(truth, perfect);
  EXPECT_EQ(p.fndr, 0.0);
  EXPECT_EQ(p.realized_fdr, 0.0);

  const std::vector<std::uint8_t> t4{1, 0, 0, 0};
  const auto r = score(t4, Idx{0, 1});
  EXPECT_EQ(r.fndr, 0.0);
  EXPECT_EQ(r.realized_fdr, 0.5);
  EXPECT_EQ(r.called, 2u);

  EXPECT_THROW(score(t4, Idx{4}), dimension_error);
}

TEST(Score, CountIdentity) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::uint8_t> truth(500);
    for (auto &x : truth)
      x = uniform01(rng) < 0.1;
    Idx called;
    for (std::size_t m = 0; m < truth.size(); ++m)
      if (uniform01(rng) < (truth[m] ? 0.8 : 0.02))
        called.push_back(m);
    const auto r = score(truth, called);
    std::size_t enriched = 0, hits = 0;
    for (std::size_t m = 0; m < truth.size(); ++m)
      enriched += truth[m];
    for (auto m : called)
      hits += truth[m];
    EXPECT_NEAR(static_cast<double>(enriched),
                static_cast<double>(hits) + r.fndr * static_cast<double>(r.not_called), 1e-9);
  }
}

TEST(TTest, Examples) {
  const std::vector<double> a{1, 2, 3}, b{2, 3, 4};
  EXPECT_DOUBLE_EQ(t_test_one_sided(a, a), 0.5);
  // Welch statistic -1.2247, 4 degrees of freedom; 40-digit reference
  EXPECT_NEAR(t_test_one_sided(a, b), 0.14393206736334533, 1e-14);

  std::vector<double> x(100), y(100);
  Rng rng(6);
  for (std::size_t i = 0; i < 100; ++i) {
    y[i] = 20 + uniform01(rng);
    x[i] = y[i] - 10;
  }
  EXPECT_LT(t_test_one_sided(x, y), 1e-10);
  EXPECT_GT(t_test_one_sided(y, x), 1 - 1e-10);
}

TEST(TTest, DegenerateInput) {
  const std::vector<double> c{1, 1, 1}, d{2, 2, 2}, one{1};
  EXPECT_THROW(t_test_one_sided(c, d), degenerate_input);
  EXPECT_THROW(t_test_one_sided(c, c), degenerate_input);
  EXPECT_THROW(t_test_one_sided(one, d), invalid_parameter);
}

TEST(Benchmark, SmokeTable) {
  const auto s = builtin_scenario("scenario5-less");
  const auto res = run_benchmark(s, quick_config(2));
  ASSERT_EQ(res.methods.size(), 2u);
  EXPECT_EQ(res.methods[0].fndr.size(), 2u);
  EXPECT_EQ(res.methods[1].fndr.size(), 2u);
  ASSERT_EQ(res.p_values.size(), 1u);
  EXPECT_TRUE(res.p_values[0].has_value());
  for (const auto &m : res.methods)
    for (double f : m.fndr)
      EXPECT_TRUE(f >= 0 && f <= 1);

  std::ostringstream text, tsv;
  write_benchmark_text(text, res);
  write_benchmark_tsv(tsv, res);
  EXPECT_NE(text.str().find("MRF"), std::string::npos);
  EXPECT_NE(text.str().find("Mixture"), std::string::npos);
  const auto rows = tsv.str();
  EXPECT_EQ(std::count(rows.begin(), rows.end(), '\n'), 5);
}

TEST(Benchmark, DeterministicAcrossThreadCounts) {
  auto s = builtin_scenario("scenario6-less");
  s.bins = 3000;
  auto cfg = quick_config(3);
  const auto one = run_benchmark(s, cfg);
  const auto again = run_benchmark(s, cfg);
  cfg.threads = 3;
  const auto three = run_benchmark(s, cfg);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(one.methods[k].fndr, again.methods[k].fndr);
    EXPECT_EQ(one.methods[k].fndr, three.methods[k].fndr);
    EXPECT_EQ(one.methods[k].called, three.methods[k].called);
  }
}

TEST(Benchmark, RejectsBadConfig) {
  const auto s = builtin_scenario("scenario6-less");
  EXPECT_THROW(run_benchmark(s, quick_config(1)), invalid_parameter);
  EXPECT_EQ(parse_method("mix"), Method::mixture);
  EXPECT_THROW(parse_method("iseq"), invalid_parameter);
}
