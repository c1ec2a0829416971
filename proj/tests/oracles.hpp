#ifndef CHIPMRF_TESTS_ORACLES_HPP
#define CHIPMRF_TESTS_ORACLES_HPP

// Reference computations written from the model formulas without the
// library's kernels: std::lgamma for the pmfs, plain products for the chain.

#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

struct Chain {
  double q0, q1;
};

inline double stationary(Chain q) { return q.q0 / (q.q0 + 1.0 - q.q1); }

inline double trans(Chain q, int from, int to) {
  const double p = from ? q.q1 : q.q0;
  return to ? p : 1.0 - p;
}

inline double pois_pmf(unsigned y, double lambda) {
  return std::exp(y * std::log(lambda) - lambda - std::lgamma(y + 1.0));
}

inline double nb_pmf(unsigned y, double mu, double phi) {
  return std::exp(std::lgamma(y + phi) - std::lgamma(phi) - std::lgamma(y + 1.0) +
                  y * std::log(mu / (mu + phi)) + phi * std::log(phi / (mu + phi)));
}

struct Emission {
  bool nb;
  double pi, bg_mean, bg_disp, sig_mean, sig_disp;

  double background(unsigned y) const {
    const double c = nb ? nb_pmf(y, bg_mean, bg_disp) : pois_pmf(y, bg_mean);
    return (y == 0 ? 1.0 - pi : 0.0) + pi * c;
  }
  double signal(unsigned y) const {
    return nb ? nb_pmf(y, sig_mean, sig_disp) : pois_pmf(y, sig_mean);
  }
};

/// Emission likelihood of each bin under each state, multiplied over replicates.
inline void emission_tables(const std::vector<std::vector<unsigned>> &y,
                            const std::vector<Emission> &e, std::vector<double> &l0,
                            std::vector<double> &l1) {
  const std::size_t M = y[0].size();
  l0.assign(M, 1.0);
  l1.assign(M, 1.0);
  for (std::size_t r = 0; r < y.size(); ++r)
    for (std::size_t m = 0; m < M; ++m) {
      l0[m] *= e[r].background(y[r][m]);
      l1[m] *= e[r].signal(y[r][m]);
    }
}

/// Probability of every configuration under the stationary chain (no data).
inline std::vector<double> chain_probabilities(std::size_t M, Chain q) {
  std::vector<double> p(std::size_t{1} << M);
  for (std::size_t cfg = 0; cfg < p.size(); ++cfg) {
    int prev = cfg & 1;
    double v = prev ? stationary(q) : 1.0 - stationary(q);
    for (std::size_t m = 1; m < M; ++m) {
      const int x = (cfg >> m) & 1;
      v *= trans(q, prev, x);
      prev = x;
    }
    p[cfg] = v;
  }
  return p;
}

/// Posterior P(X_m = 1 | Y) by summing over all 2^M configurations.
inline std::vector<double> enumerate_posterior(const std::vector<std::vector<unsigned>> &y,
                                               const std::vector<Emission> &e, Chain q) {
  std::vector<double> l0, l1;
  emission_tables(y, e, l0, l1);
  const std::size_t M = l0.size();
  const auto prior = chain_probabilities(M, q);
  std::vector<double> num(M, 0.0);
  double z = 0.0;
  for (std::size_t cfg = 0; cfg < prior.size(); ++cfg) {
    double v = prior[cfg];
    for (std::size_t m = 0; m < M; ++m)
      v *= ((cfg >> m) & 1) ? l1[m] : l0[m];
    z += v;
    for (std::size_t m = 0; m < M; ++m)
      if ((cfg >> m) & 1)
        num[m] += v;
  }
  for (auto &v : num)
    v /= z;
  return num;
}

/// Scaled forward-backward smoothing for the same model.
inline std::vector<double> forward_backward(const std::vector<std::vector<unsigned>> &y,
                                            const std::vector<Emission> &e, Chain q) {
  std::vector<double> l0, l1;
  emission_tables(y, e, l0, l1);
  const std::size_t M = l0.size();
  std::vector<double> a0(M), a1(M), b0(M, 1.0), b1(M, 1.0);
  double s1 = stationary(q);
  a0[0] = (1.0 - s1) * l0[0];
  a1[0] = s1 * l1[0];
  auto norm = [](double &x, double &y) {
    const double s = x + y;
    x /= s;
    y /= s;
  };
  norm(a0[0], a1[0]);
  for (std::size_t m = 1; m < M; ++m) {
    a0[m] = (a0[m - 1] * trans(q, 0, 0) + a1[m - 1] * trans(q, 1, 0)) * l0[m];
    a1[m] = (a0[m - 1] * trans(q, 0, 1) + a1[m - 1] * trans(q, 1, 1)) * l1[m];
    norm(a0[m], a1[m]);
  }
  for (std::size_t m = M - 1; m-- > 0;) {
    b0[m] = trans(q, 0, 0) * l0[m + 1] * b0[m + 1] + trans(q, 0, 1) * l1[m + 1] * b1[m + 1];
    b1[m] = trans(q, 1, 0) * l0[m + 1] * b0[m + 1] + trans(q, 1, 1) * l1[m + 1] * b1[m + 1];
    norm(b0[m], b1[m]);
  }
  std::vector<double> post(M);
  for (std::size_t m = 0; m < M; ++m)
    post[m] = a1[m] * b1[m] / (a0[m] * b0[m] + a1[m] * b1[m]);
  return post;
}

} // namespace oracle

#endif
