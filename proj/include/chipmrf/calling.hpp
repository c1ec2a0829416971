#ifndef CHIPMRF_CALLING_HPP
#define CHIPMRF_CALLING_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "data.hpp"
#include "error.hpp"

namespace chipmrf {

struct FdrCall {
  std::vector<std::size_t> called; // ascending bin indices
  double threshold;                // smallest called probability (1 if none)
  double expected_fdr;             // mean of (1 - p) over called bins
  std::size_t discoveries;
};

/// Calls the largest set of top-ranked bins whose expected false discovery
/// rate, the mean of 1 - P(X = 1 | Y) over the set, stays within alpha.
/// Bins tied at the cut are taken or left as a group.
inline FdrCall fdr_call(std::span<const double> posteriors, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw invalid_parameter("FDR level must lie in (0,1)");
  for (double p : posteriors)
    if (!(p >= 0.0 && p <= 1.0))
      throw invalid_parameter("posterior probabilities must lie in [0,1]");

  std::vector<std::size_t> order(posteriors.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return posteriors[a] > posteriors[b];
  });

  // The running mean of (1 - p) is non-decreasing along this order, so the
  // first tie group that breaks the bound ends the call set.
  double false_mass = 0.0;
  std::size_t taken = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double group_mass = 0.0;
    while (j < order.size() && posteriors[order[j]] == posteriors[order[i]]) {
      group_mass += 1.0 - posteriors[order[j]];
      ++j;
    }
    if ((false_mass + group_mass) / static_cast<double>(j) > alpha)
      break;
    false_mass += group_mass;
    taken = j;
    i = j;
  }

  FdrCall out;
  out.discoveries = taken;
  out.called.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(taken));
  std::sort(out.called.begin(), out.called.end());
  out.threshold = taken ? posteriors[order[taken - 1]] : 1.0;
  out.expected_fdr = taken ? false_mass / static_cast<double>(taken) : 0.0;
  return out;
}

/// P(X1 != X2) from the two marginal posteriors.
inline double differential_prob(double p1, double p2) {
  if (!(p1 >= 0.0 && p1 <= 1.0 && p2 >= 0.0 && p2 <= 1.0))
    throw invalid_parameter("posterior probabilities must lie in [0,1]");
  return (1.0 - p1) * p2 + p1 * (1.0 - p2);
}

struct DifferentialCall {
  FdrCall call;
  std::vector<double> probabilities; // per bin P(X1 != X2)
};

inline DifferentialCall call_differential(std::span<const double> post1,
                                          std::span<const double> post2, double alpha) {
  if (post1.size() != post2.size())
    throw dimension_error("posterior tracks differ in length");
  DifferentialCall d;
  d.probabilities.resize(post1.size());
  for (std::size_t m = 0; m < post1.size(); ++m)
    d.probabilities[m] = differential_prob(post1[m], post2[m]);
  d.call = fdr_call(d.probabilities, alpha);
  return d;
}

enum class CallType { enriched, differential };

struct RegionCall {
  std::string chrom;
  std::uint64_t start;
  std::uint64_t end;
  std::size_t first_bin;
  std::size_t last_bin; // inclusive
  double mean_posterior;
  CallType type = CallType::enriched;
};

/// Maximal runs of consecutive called bins; runs never cross a segment.
inline std::vector<RegionCall> merge_regions(std::span<const std::size_t> called,
                                             std::span<const Bin> bins,
                                             std::span<const double> posteriors,
                                             CallType type = CallType::enriched) {
  if (posteriors.size() != bins.size())
    throw dimension_error("posterior track and bins differ in length");
  std::vector<RegionCall> out;
  double sum = 0.0;
  auto close = [&] {
    auto &r = out.back();
    r.mean_posterior = sum / static_cast<double>(r.last_bin - r.first_bin + 1);
  };
  for (std::size_t i = 0; i < called.size(); ++i) {
    const std::size_t m = called[i];
    if (m >= bins.size())
      throw dimension_error("called bin index out of range");
    if (i > 0 && m <= called[i - 1])
      throw invalid_parameter("called bins must be strictly increasing");
    const bool extend = !out.empty() && m == out.back().last_bin + 1 &&
                        bins[m].segment == bins[m - 1].segment;
    if (extend) {
      out.back().last_bin = m;
      out.back().end = bins[m].end;
      sum += posteriors[m];
    } else {
      if (!out.empty())
        close();
      out.push_back({bins[m].chrom, bins[m].start, bins[m].end, m, m, 0.0, type});
      sum = posteriors[m];
    }
  }
  if (!out.empty())
    close();
  return out;
}

/// BED score: round(1000 * mean posterior).
inline int bed_score(const RegionCall &r) {
  return static_cast<int>(std::lround(1000.0 * r.mean_posterior));
}

} // namespace chipmrf

#endif
