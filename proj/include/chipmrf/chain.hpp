#ifndef CHIPMRF_CHAIN_HPP
#define CHIPMRF_CHAIN_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "random.hpp"

namespace chipmrf {

/// Transition probabilities of the binary stationary chain.
/// q0 = P(X[m+1] = 1 | X[m] = 0), q1 = P(X[m+1] = 1 | X[m] = 1).
struct ChainParams {
  double q0;
  double q1;
};

inline void validate(const ChainParams &q) {
  if (!(q.q0 > 0.0 && q.q0 < 1.0))
    throw invalid_parameter("q0 must lie strictly inside (0,1), got " +
                            std::to_string(q.q0));
  if (!(q.q1 > 0.0 && q.q1 < 1.0))
    throw invalid_parameter("q1 must lie strictly inside (0,1), got " +
                            std::to_string(q.q1));
}

inline double stationary_prob(const ChainParams &q) {
  return q.q0 / (q.q0 + 1.0 - q.q1);
}

/// log P(X[m+1] = to | X[m] = from)
inline double log_transition(const ChainParams &q, int from, int to) {
  const double p1 = from ? q.q1 : q.q0;
  return to ? std::log(p1) : std::log1p(-p1);
}

inline double log_initial(const ChainParams &q, int state) {
  const double denom = q.q0 + 1.0 - q.q1;
  return state ? std::log(q.q0 / denom) : std::log((1.0 - q.q1) / denom);
}

/// Joint pair probabilities; the off-diagonal pair mass is split evenly,
/// which is what makes the initial law stationary.
struct DeltaParams {
  double delta11;
  double delta00;

  double delta10() const { return (1.0 - delta11 - delta00) / 2.0; }
  double delta01() const { return delta10(); }
  double delta1() const { return delta11 + delta10(); }
  double delta0() const { return 1.0 - delta1(); }
};

inline void validate(const DeltaParams &d) {
  if (!(d.delta11 > 0.0 && d.delta11 < 1.0) || !(d.delta00 > 0.0 && d.delta00 < 1.0))
    throw invalid_parameter("delta11 and delta00 must lie inside (0,1)");
  if (!(d.delta11 + d.delta00 < 1.0))
    throw invalid_parameter("delta11 + delta00 must be < 1 (off-diagonal mass "
                            "would vanish)");
}

inline ChainParams delta_to_q(const DeltaParams &d) {
  validate(d);
  ChainParams q{d.delta01() / d.delta0(), d.delta11 / d.delta1()};
  validate(q);
  return q;
}

inline DeltaParams q_to_delta(const ChainParams &q) {
  validate(q);
  const double d1 = stationary_prob(q);
  const double d0 = 1.0 - d1;
  return DeltaParams{q.q1 * d1, (1.0 - q.q0) * d0};
}

/// Half-open [begin, end) range of bins forming one independent chain.
struct Segment {
  std::size_t begin;
  std::size_t end;

  std::size_t size() const { return end - begin; }
  bool operator==(const Segment &) const = default;
};

struct LatentChain {
  std::vector<std::uint8_t> states;
  std::vector<Segment> segments;

  static LatentChain single(std::vector<std::uint8_t> s) {
    LatentChain c;
    c.segments.push_back({0, s.size()});
    c.states = std::move(s);
    return c;
  }

  std::size_t size() const { return states.size(); }
};

inline void validate(const LatentChain &c) {
  std::size_t expect = 0;
  for (const auto &s : c.segments) {
    if (s.begin != expect || s.end <= s.begin)
      throw invalid_parameter("chain segments must partition the bins");
    expect = s.end;
  }
  if (expect != c.states.size())
    throw invalid_parameter("chain segments must cover every bin");
  for (auto v : c.states)
    if (v > 1)
      throw invalid_parameter("latent states must be 0 or 1");
}

struct TransitionCounts {
  std::uint64_t n11 = 0;
  std::uint64_t n10 = 0;
  std::uint64_t n01 = 0;
  std::uint64_t n00 = 0;
  std::vector<std::uint8_t> first_states; // one per segment

  std::uint64_t total() const { return n11 + n10 + n01 + n00; }
};

inline TransitionCounts transition_counts(std::span<const std::uint8_t> states,
                                          std::span<const Segment> segments) {
  TransitionCounts tc;
  tc.first_states.reserve(segments.size());
  std::uint64_t n[2][2] = {{0, 0}, {0, 0}};
  for (const auto &seg : segments) {
    tc.first_states.push_back(states[seg.begin]);
    for (std::size_t m = seg.begin + 1; m < seg.end; ++m)
      ++n[states[m - 1]][states[m]];
  }
  tc.n00 = n[0][0];
  tc.n01 = n[0][1];
  tc.n10 = n[1][0];
  tc.n11 = n[1][1];
  return tc;
}

inline TransitionCounts transition_counts(const LatentChain &chain) {
  return transition_counts(chain.states, chain.segments);
}

inline double initial_logdensity(std::span<const std::uint8_t> first_states,
                                 const ChainParams &q) {
  const double l1 = log_initial(q, 1), l0 = log_initial(q, 0);
  double s = 0.0;
  for (auto f : first_states)
    s += f ? l1 : l0;
  return s;
}

inline double chain_logdensity(const TransitionCounts &tc, const ChainParams &q) {
  validate(q);
  return initial_logdensity(tc.first_states, q) +
         tc.n11 * std::log(q.q1) + tc.n10 * std::log1p(-q.q1) +
         tc.n01 * std::log(q.q0) + tc.n00 * std::log1p(-q.q0);
}

inline double chain_logdensity(const LatentChain &chain, const ChainParams &q) {
  return chain_logdensity(transition_counts(chain), q);
}

inline void sample_segment(std::span<std::uint8_t> out, const ChainParams &q,
                           Rng &rng) {
  if (out.empty())
    return;
  out[0] = uniform01(rng) < stationary_prob(q) ? 1 : 0;
  for (std::size_t m = 1; m < out.size(); ++m) {
    const double p1 = out[m - 1] ? q.q1 : q.q0;
    out[m] = uniform01(rng) < p1 ? 1 : 0;
  }
}

inline LatentChain sample_chain(std::size_t bins, const ChainParams &q, Rng &rng) {
  validate(q);
  if (bins == 0)
    throw invalid_parameter("chain length must be at least 1");
  LatentChain c;
  c.states.resize(bins);
  c.segments.push_back({0, bins});
  sample_segment(c.states, q, rng);
  return c;
}

/// Each segment restarts from the stationary law.
inline LatentChain sample_chain(std::vector<Segment> segments, const ChainParams &q,
                                Rng &rng) {
  validate(q);
  LatentChain c;
  c.states.resize(segments.empty() ? 0 : segments.back().end);
  c.segments = std::move(segments);
  validate(c);
  for (const auto &s : c.segments)
    sample_segment(std::span(c.states).subspan(s.begin, s.size()), q, rng);
  return c;
}

struct ConditionalFrequencies {
  std::optional<double> f1_given_1;
  std::optional<double> f1_given_0;
};

/// Empirical P(call[m+1] = 1 | call[m] = i) over a single run of calls.
inline ConditionalFrequencies
conditional_frequencies(std::span<const std::uint8_t> calls) {
  if (calls.size() < 2)
    throw invalid_parameter("conditional frequencies need at least two calls");
  const Segment whole{0, calls.size()};
  const auto tc = transition_counts(calls, std::span(&whole, 1));
  ConditionalFrequencies f;
  if (tc.n11 + tc.n10 > 0)
    f.f1_given_1 = static_cast<double>(tc.n11) / static_cast<double>(tc.n11 + tc.n10);
  if (tc.n01 + tc.n00 > 0)
    f.f1_given_0 = static_cast<double>(tc.n01) / static_cast<double>(tc.n01 + tc.n00);
  return f;
}

} // namespace chipmrf

#endif
