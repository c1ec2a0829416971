#include <cmath>
#include <numeric>
#include <variant>

#include <gtest/gtest.h>

#include "chipmrf/distributions.hpp"
#include "stats.hpp"

using namespace chipmrf;

TEST(Poisson, PmfValues) {
  EXPECT_DOUBLE_EQ(pois_logpmf(0, {1.0}), -1.0);
  EXPECT_DOUBLE_EQ(pois_logpmf(0, {0.5}), -0.5);
  // log(0.22404180765538775...) from a 50-digit evaluation
  EXPECT_NEAR(pois_logpmf(3, {3.0}), -1.4959226032237259, 1e-12);
}

TEST(Poisson, RejectsNonPositiveRate) {
  EXPECT_THROW(pois_logpmf(1, {0.0}), invalid_parameter);
  EXPECT_THROW(pois_logpmf(1, {-1.0}), invalid_parameter);
}

TEST(NegativeBinomial, PmfValues) {
  EXPECT_NEAR(nb_logpmf(0, {2.0, 1.0}), std::log(1.0 / 3.0), 1e-14);
  EXPECT_NEAR(nb_logpmf(2, {6.95, 0.89}), -2.3505361763658358, 1e-11);
}

TEST(NegativeBinomial, RejectsInvalid) {
  EXPECT_THROW(nb_logpmf(0, {0.0, 1.0}), invalid_parameter);
  EXPECT_THROW(nb_logpmf(0, {1.0, 0.0}), invalid_parameter);
}

TEST(NegativeBinomial, PoissonLimit) {
  for (count_t y = 0; y <= 17; ++y)
    EXPECT_NEAR(nb_logpmf(y, {3.0, 1e6}), pois_logpmf(y, {3.0}), 1e-4) << "y=" << y;
}

// At phi = 1e6 the exact log-ratio grows like (y(y-1)/2 - y mu + mu^2/2) / phi
// and passes 1e-4 from y = 18 on; 40-digit reference gaps for y = 18..20.
TEST(NegativeBinomial, PoissonLimitExactGap) {
  const double gap[] = {1.0349918e-4, 1.1849902e-4, 1.3449885e-4};
  for (count_t y = 18; y <= 20; ++y)
    EXPECT_NEAR(nb_logpmf(y, {3.0, 1e6}) - pois_logpmf(y, {3.0}), gap[y - 18], 1e-10);
}

TEST(ZeroInflated, ZipValues) {
  EXPECT_DOUBLE_EQ(zip_logpmf(0, {1.0}, {2.0}), -2.0);
  EXPECT_NEAR(zip_logpmf(0, {0.5}, {1.0}), -0.37988549304172248, 1e-14);
  EXPECT_NEAR(zip_logpmf(4, {0.5}, {1.0}), std::log(0.5) + pois_logpmf(4, {1.0}), 1e-14);
}

TEST(ZeroInflated, ZinbValues) {
  EXPECT_NEAR(zinb_logpmf(0, {1.0}, {0.33, 2.01}), nb_logpmf(0, {0.33, 2.01}), 1e-15);
  EXPECT_NEAR(zinb_logpmf(0, {0.5}, {0.5, 0.5}), -0.15834718382037494, 1e-14);
  EXPECT_NEAR(std::exp(zinb_logpmf(0, {0.5}, {0.5, 0.5})), 0.85355339059327376, 1e-14);
}

TEST(ZeroInflated, ZinbNormalization) {
  double s = 0.0;
  for (count_t y = 0; y <= 10000; ++y)
    s += std::exp(zinb_logpmf(y, {0.66}, {0.33, 2.01}));
  EXPECT_NEAR(s, 1.0, 1e-8);
}

TEST(ZeroInflated, RejectsInvalidWeight) {
  EXPECT_THROW(zip_logpmf(0, {1.5}, {1.0}), invalid_parameter);
  EXPECT_THROW(zinb_logpmf(0, {-0.1}, {1.0, 1.0}), invalid_parameter);
}

namespace {

CountDistribution random_distribution(Rng &rng, int kind) {
  const double pi = uniform01(rng);
  const double mu = 0.05 + 20.0 * uniform01(rng);
  const double phi = std::exp(-3.0 + 7.0 * uniform01(rng));
  switch (kind % 4) {
  case 0:
    return PoissonParams{mu};
  case 1:
    return NbParams{mu, phi};
  case 2:
    return ZipParams{{pi}, {mu}};
  default:
    return ZinbParams{{pi}, {mu, phi}};
  }
}

// Sums the pmf until a geometric bound on the remaining tail drops below
// `tail`. Beyond the current y the successive pmf ratio never exceeds rho.
double mass_up_to_tail(const CountDistribution &d, double tail) {
  double mu = 0.0, phi = 0.0;
  bool nb = false;
  std::visit(
      [&](const auto &p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, PoissonParams>) {
          mu = p.lambda;
        } else if constexpr (std::is_same_v<T, NbParams>) {
          mu = p.mu, phi = p.phi, nb = true;
        } else if constexpr (std::is_same_v<T, ZipParams>) {
          mu = p.count.lambda;
        } else {
          mu = p.count.mu, phi = p.count.phi, nb = true;
        }
      },
      d);
  double s = 0.0;
  for (count_t y = 0;; ++y) {
    const double pmf = std::exp(logpmf(y, d));
    s += pmf;
    double rho;
    if (nb) {
      const double r = mu / (mu + phi);
      rho = phi < 1.0 ? r : r * (y + phi) / (y + 1.0);
    } else {
      rho = mu / (y + 1.0);
    }
    if (y > 0 && rho < 1.0 && pmf * rho / (1.0 - rho) < tail)
      return s;
  }
}

} // namespace

TEST(Properties, Normalization) {
  Rng rng(11);
  for (int k = 0; k < 200; ++k) {
    const auto d = random_distribution(rng, k);
    const double s = mass_up_to_tail(d, 1e-9);
    EXPECT_GE(s, 1.0 - 1e-6) << "instance " << k;
    EXPECT_LE(s, 1.0 + 1e-10) << "instance " << k;
  }
}

TEST(Properties, UnitWeightReductions) {
  Rng rng(12);
  for (int k = 0; k < 100; ++k) {
    const double mu = 0.05 + 20.0 * uniform01(rng);
    const double phi = std::exp(-3.0 + 7.0 * uniform01(rng));
    for (count_t y = 0; y < 60; ++y) {
      EXPECT_DOUBLE_EQ(zip_logpmf(y, {1.0}, {mu}), pois_logpmf(y, {mu}));
      EXPECT_DOUBLE_EQ(zinb_logpmf(y, {1.0}, {mu, phi}), nb_logpmf(y, {mu, phi}));
    }
  }
}

TEST(Properties, LogGammaAccuracy) {
  // integer and half-integer points against exact values
  double lf = 0.0;
  for (int n = 1; n < 170; ++n) {
    EXPECT_NEAR(log_gamma(n), lf, 1e-12 * std::max(1.0, lf)) << n;
    lf += std::log(static_cast<double>(n));
  }
  EXPECT_NEAR(log_gamma(0.5), 0.5 * std::log(M_PI), 1e-13);
  EXPECT_NEAR(log_gamma(1e-4), 9.2102826586339623, 1e-10);
}

TEST(Sampling, ZeroWeightIsDegenerate) {
  Rng rng(1);
  const auto v = sample(ZipParams{{0.0}, {5.0}}, 100, rng);
  for (auto y : v)
    EXPECT_EQ(y, 0u);
}

TEST(Sampling, PoissonMean) {
  Rng rng(2);
  const auto v = sample(PoissonParams{3.0}, 100000, rng);
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / 1e5;
  EXPECT_NEAR(m, 3.0, 3.0 * std::sqrt(3.0 / 1e5));
}

TEST(Sampling, ZinbZeroFraction) {
  Rng rng(3);
  const auto v = sample(ZinbParams{{0.5}, {0.5, 0.5}}, 100000, rng);
  const double z = static_cast<double>(std::count(v.begin(), v.end(), 0u)) / 1e5;
  EXPECT_NEAR(z, 0.853553, 0.01);
}

TEST(Sampling, Deterministic) {
  Rng a(99), b(99);
  EXPECT_EQ(sample(NbParams{4.0, 0.7}, 1000, a), sample(NbParams{4.0, 0.7}, 1000, b));
}

TEST(Sampling, RejectsInvalid) {
  Rng rng(1);
  EXPECT_THROW(sample(PoissonParams{-1.0}, 10, rng), invalid_parameter);
}

TEST(Sampling, ChiSquareAgainstPmf) {
  Rng rng(4);
  const CountDistribution cases[] = {
      PoissonParams{3.0},         NbParams{6.95, 0.89},           ZipParams{{0.66}, {0.33}},
      ZinbParams{{0.66}, {0.33, 2.01}}, ZinbParams{{0.53}, {0.36, 0.88}}, NbParams{1.38, 2.07}};
  for (const auto &d : cases) {
    const auto v = sample(d, 100000, rng);
    const double p =
        testing_util::chi_square_pvalue(v, [&](count_t y) { return std::exp(logpmf(y, d)); });
    EXPECT_GT(p, 1e-3);
  }
}
