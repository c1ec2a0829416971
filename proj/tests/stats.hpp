#ifndef CHIPMRF_TESTS_STATS_HPP
#define CHIPMRF_TESTS_STATS_HPP

#include <cmath>
#include <span>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "chipmrf/distributions.hpp"

namespace testing_util {

// Pearson goodness of fit of integer draws against a pmf. Cells with an
// expected count below 5 are pooled into their neighbour; the tail above
// the last cell is one pooled cell.
inline double chi_square_pvalue(std::span<const chipmrf::count_t> draws, const auto &pmf) {
  const double n = static_cast<double>(draws.size());
  std::size_t ymax = 0;
  for (auto y : draws)
    ymax = std::max<std::size_t>(ymax, y);
  std::vector<double> obs(ymax + 2, 0.0), expct(ymax + 2, 0.0);
  for (auto y : draws)
    obs[y] += 1.0;
  double mass = 0.0;
  for (std::size_t y = 0; y <= ymax; ++y) {
    expct[y] = n * pmf(static_cast<chipmrf::count_t>(y));
    mass += expct[y] / n;
  }
  expct[ymax + 1] = n * std::max(0.0, 1.0 - mass);

  std::vector<double> o, e;
  double ao = 0, ae = 0;
  for (std::size_t y = 0; y < obs.size(); ++y) {
    ao += obs[y];
    ae += expct[y];
    if (ae >= 5.0) {
      o.push_back(ao);
      e.push_back(ae);
      ao = ae = 0;
    }
  }
  if (ae > 0 || ao > 0) {
    if (e.empty()) {
      o.push_back(ao);
      e.push_back(ae);
    } else {
      o.back() += ao;
      e.back() += ae;
    }
  }
  if (e.size() < 2)
    return 1.0;
  double stat = 0.0;
  for (std::size_t k = 0; k < e.size(); ++k)
    stat += (o[k] - e[k]) * (o[k] - e[k]) / e[k];
  boost::math::chi_squared dist(static_cast<double>(e.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

} // namespace testing_util

#endif
