#ifndef CHIPMRF_CONFIG_HPP
#define CHIPMRF_CONFIG_HPP

#include <charconv>
#include <istream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "data.hpp"
#include "error.hpp"
#include "io.hpp"
#include "model.hpp"
#include "simeval.hpp"

namespace chipmrf {

/// `key = value` lines grouped under optional `[kind name]` headers; `#`
/// starts a comment. Keys not consumed by the reader are rejected.
struct ConfigEntry {
  std::string key;
  std::string value;
  std::size_t line;
};

struct ConfigSection {
  std::string kind; // empty for the leading global section
  std::string name;
  std::size_t line = 0;
  std::vector<ConfigEntry> entries;
};

class KeyValueConfig {
public:
  static KeyValueConfig parse(std::istream &in, const std::string &where = "config") {
    KeyValueConfig cfg;
    cfg.where_ = where;
    cfg.sections_.push_back({});
    std::string raw;
    std::size_t lineno = 0;
    while (detail::getline_stripped(in, raw)) {
      ++lineno;
      std::string_view s = raw;
      if (const auto h = s.find('#'); h != std::string_view::npos)
        s = s.substr(0, h);
      s = trim(s);
      if (s.empty())
        continue;
      if (s.front() == '[') {
        if (s.back() != ']')
          throw parse_error(where, lineno, "unterminated section header");
        const auto words = detail::split_ws(s.substr(1, s.size() - 2));
        if (words.empty() || words.size() > 2)
          throw parse_error(where, lineno, "section header must be '[kind]' or '[kind name]'");
        ConfigSection sec;
        sec.kind = std::string(words[0]);
        if (words.size() == 2)
          sec.name = std::string(words[1]);
        sec.line = lineno;
        cfg.sections_.push_back(std::move(sec));
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string_view::npos)
        throw parse_error(where, lineno, "expected 'key = value'");
      const auto key = trim(s.substr(0, eq));
      const auto value = trim(s.substr(eq + 1));
      if (key.empty())
        throw parse_error(where, lineno, "empty key");
      auto &sec = cfg.sections_.back();
      for (const auto &e : sec.entries)
        if (e.key == key)
          throw parse_error(where, lineno, "duplicate key '" + std::string(key) + "'");
      sec.entries.push_back({std::string(key), std::string(value), lineno});
    }
    return cfg;
  }

  const std::string &where() const { return where_; }
  const std::vector<ConfigSection> &sections() const { return sections_; }
  const ConfigSection &global() const { return sections_.front(); }

  static std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos)
      return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
  }

private:
  std::string where_;
  std::vector<ConfigSection> sections_;
};

/// Typed reads from one section with a record of consumed keys.
class SectionReader {
public:
  SectionReader(const ConfigSection &sec, std::string where)
      : sec_(sec), where_(std::move(where)) {}

  const ConfigEntry *find(std::string_view key) {
    for (const auto &e : sec_.entries)
      if (e.key == key) {
        used_.insert(e.key);
        return &e;
      }
    return nullptr;
  }

  std::string string(std::string_view key) {
    if (const auto *e = find(key))
      return e->value;
    throw parse_error(where_, sec_.line, "missing key '" + std::string(key) + "'");
  }

  std::string string(std::string_view key, const std::string &fallback) {
    const auto *e = find(key);
    return e ? e->value : fallback;
  }

  double real(std::string_view key) {
    if (const auto *e = find(key))
      return to_real(*e);
    throw parse_error(where_, sec_.line, "missing key '" + std::string(key) + "'");
  }

  double real(std::string_view key, double fallback) {
    const auto *e = find(key);
    return e ? to_real(*e) : fallback;
  }

  std::uint64_t integer(std::string_view key) {
    if (const auto *e = find(key))
      return to_integer(*e);
    throw parse_error(where_, sec_.line, "missing key '" + std::string(key) + "'");
  }

  std::uint64_t integer(std::string_view key, std::uint64_t fallback) {
    const auto *e = find(key);
    return e ? to_integer(*e) : fallback;
  }

  std::vector<std::string> list(std::string_view key) {
    std::vector<std::string> out;
    if (const auto *e = find(key)) {
      std::string v = e->value;
      for (auto &ch : v)
        if (ch == ',')
          ch = ' ';
      for (auto w : detail::split_ws(v))
        out.emplace_back(w);
    }
    return out;
  }

  /// Rejects keys that no read touched.
  void finish() const {
    for (const auto &e : sec_.entries)
      if (!used_.count(e.key))
        throw parse_error(where_, e.line, "unknown key '" + e.key + "'");
  }

private:
  double to_real(const ConfigEntry &e) const {
    double v;
    const auto *b = e.value.data();
    const auto res = std::from_chars(b, b + e.value.size(), v);
    if (res.ec != std::errc() || res.ptr != b + e.value.size())
      throw parse_error(where_, e.line, "'" + e.key + "' must be a number");
    return v;
  }

  std::uint64_t to_integer(const ConfigEntry &e) const {
    std::uint64_t v;
    if (!detail::parse_uint(std::string_view(e.value), v))
      throw parse_error(where_, e.line, "'" + e.key + "' must be a non-negative integer");
    return v;
  }

  const ConfigSection &sec_;
  std::string where_;
  std::set<std::string, std::less<>> used_;
};

// ---------------------------------------------------------------------------
// Design
//
//   bin_width = 200
//   [condition cbp]
//   antibody = CBP
//   replicates = cbp_rep1, cbp_rep2

inline ExperimentDesign read_design(std::istream &in, const std::string &where = "design") {
  const auto cfg = KeyValueConfig::parse(in, where);
  ExperimentDesign d;
  SectionReader g(cfg.global(), where);
  d.bin_width = g.integer("bin_width", 200);
  g.finish();
  if (d.bin_width < 1)
    throw parse_error(where, 1, "bin_width must be at least 1");
  for (std::size_t k = 1; k < cfg.sections().size(); ++k) {
    const auto &sec = cfg.sections()[k];
    if (sec.kind != "condition")
      throw parse_error(where, sec.line, "unknown section '" + sec.kind + "'");
    if (sec.name.empty())
      throw parse_error(where, sec.line, "condition needs a name");
    for (const auto &c : d.conditions)
      if (c.label == sec.name)
        throw parse_error(where, sec.line, "condition '" + sec.name + "' defined twice");
    SectionReader r(sec, where);
    Condition c{sec.name, r.string("antibody", ""), r.list("replicates")};
    r.finish();
    if (c.replicates.empty())
      throw parse_error(where, sec.line, "condition '" + sec.name + "' lists no replicates");
    d.conditions.push_back(std::move(c));
  }
  if (d.conditions.empty())
    throw parse_error(where, 1, "design defines no conditions");
  return d;
}

inline void write_design(std::ostream &os, const ExperimentDesign &d) {
  os << "bin_width = " << d.bin_width << '\n';
  for (const auto &c : d.conditions) {
    os << "\n[condition " << c.label << "]\n";
    if (!c.antibody.empty())
      os << "antibody = " << c.antibody << '\n';
    os << "replicates =";
    for (std::size_t k = 0; k < c.replicates.size(); ++k)
      os << (k ? ", " : " ") << c.replicates[k];
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Priors: flat keys, every one optional.
//
//   pi_a pi_b q0_a q0_b q1_a q1_b
//   poisson_rate_shape poisson_rate_rate nb_mean_shape nb_mean_rate
//   nb_dispersion_shape nb_dispersion_rate initial_step

inline PriorConfig read_priors(std::istream &in, const std::string &where = "priors") {
  const auto cfg = KeyValueConfig::parse(in, where);
  if (cfg.sections().size() > 1)
    throw parse_error(where, cfg.sections()[1].line, "priors take no sections");
  SectionReader r(cfg.global(), where);
  PriorConfig p;
  auto beta = [&](const char *name, BetaPrior &b) {
    b.a = r.real(std::string(name) + "_a", b.a);
    b.b = r.real(std::string(name) + "_b", b.b);
  };
  auto gamma = [&](const char *name, GammaPrior &g) {
    g.shape = r.real(std::string(name) + "_shape", g.shape);
    g.rate = r.real(std::string(name) + "_rate", g.rate);
  };
  beta("pi", p.pi);
  beta("q0", p.q0);
  beta("q1", p.q1);
  gamma("poisson_rate", p.poisson_rate);
  gamma("nb_mean", p.nb_mean);
  gamma("nb_dispersion", p.nb_dispersion);
  p.initial_step = r.real("initial_step", p.initial_step);
  r.finish();
  validate(p);
  return p;
}

// ---------------------------------------------------------------------------
// Scenario
//
//   name = scenario5-less-efficient
//   latent = markov            # or bernoulli
//   q0 = 0.003                 # markov
//   q1 = 0.839
//   p = 0.017                  # bernoulli
//   family = zinb              # zip | zinb | pois | nb
//   bins = 10000
//   [replicate]
//   pi = 0.634
//   bg_mean = 0.430
//   bg_dispersion = 2.322
//   sig_mean = 2.738
//   sig_dispersion = 1.548

inline Scenario read_scenario(std::istream &in, const std::string &where = "scenario") {
  const auto cfg = KeyValueConfig::parse(in, where);
  SectionReader g(cfg.global(), where);
  Scenario s;
  s.name = g.string("name", "scenario");
  const auto latent = g.string("latent", "markov");
  if (latent == "markov") {
    s.latent = LatentKind::markov;
    s.chain = {g.real("q0"), g.real("q1")};
  } else if (latent == "bernoulli") {
    s.latent = LatentKind::bernoulli;
    s.p = g.real("p");
  } else {
    throw parse_error(where, 1, "latent must be 'markov' or 'bernoulli'");
  }
  try {
    s.family = parse_family(g.string("family", "zinb"));
  } catch (const invalid_parameter &e) {
    throw parse_error(where, 1, e.what());
  }
  s.bins = g.integer("bins", 10000);
  g.finish();
  for (std::size_t k = 1; k < cfg.sections().size(); ++k) {
    const auto &sec = cfg.sections()[k];
    if (sec.kind != "replicate")
      throw parse_error(where, sec.line, "unknown section '" + sec.kind + "'");
    SectionReader r(sec, where);
    ReplicateEmission e;
    e.family = s.family;
    e.pi = zero_inflated(s.family) ? r.real("pi") : 1.0;
    e.bg_mean = r.real("bg_mean");
    e.sig_mean = r.real("sig_mean");
    if (negative_binomial(s.family)) {
      e.bg_dispersion = r.real("bg_dispersion");
      e.sig_dispersion = r.real("sig_dispersion");
    }
    r.finish();
    s.replicates.push_back(e);
  }
  try {
    validate(s);
  } catch (const invalid_parameter &e) {
    throw parse_error(where, 1, e.what());
  }
  return s;
}

inline void write_scenario(std::ostream &os, const Scenario &s) {
  os << "name = " << s.name << '\n';
  if (s.latent == LatentKind::markov)
    os << "latent = markov\nq0 = " << format_double(s.chain.q0)
       << "\nq1 = " << format_double(s.chain.q1) << '\n';
  else
    os << "latent = bernoulli\np = " << format_double(s.p) << '\n';
  os << "family = " << to_string(s.family) << "\nbins = " << s.bins << '\n';
  for (const auto &e : s.replicates) {
    os << "\n[replicate]\n";
    if (zero_inflated(s.family))
      os << "pi = " << format_double(e.pi) << '\n';
    os << "bg_mean = " << format_double(e.bg_mean) << '\n';
    if (negative_binomial(s.family))
      os << "bg_dispersion = " << format_double(e.bg_dispersion) << '\n';
    os << "sig_mean = " << format_double(e.sig_mean) << '\n';
    if (negative_binomial(s.family))
      os << "sig_dispersion = " << format_double(e.sig_dispersion) << '\n';
  }
}

} // namespace chipmrf

#endif
