// chipmrf command-line interface. Every subcommand prints a JSON summary on
// stdout; failures print one JSON line on stderr and exit nonzero.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "chipmrf/chipmrf.hpp"

using json = nlohmann::ordered_json;
using namespace chipmrf;

namespace {

struct io_failure : error {
  explicit io_failure(const std::string &msg) : error("io", msg) {}
};

std::ifstream open_in(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw io_failure("cannot open '" + path + "' for reading");
  return in;
}

// Writes to `path` atomically enough for our purposes: whole content at once.
void write_file(const std::string &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw io_failure("cannot open '" + path + "' for writing");
  out << content;
  if (!out)
    throw io_failure("write to '" + path + "' failed");
}

template <class F> void write_with(const std::string &path, F &&f) {
  std::ostringstream os;
  f(os);
  write_file(path, os.str());
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json emission_json(const std::string &label, const ReplicateEmission &e) {
  json j{{"replicate", label}};
  if (zero_inflated(e.family))
    j["pi"] = e.pi;
  j["bg_mean"] = e.bg_mean;
  if (negative_binomial(e.family))
    j["bg_dispersion"] = e.bg_dispersion;
  j["sig_mean"] = e.sig_mean;
  if (negative_binomial(e.family))
    j["sig_dispersion"] = e.sig_dispersion;
  return j;
}

ReplicateEmission emission_from_json(const json &j, Family family) {
  ReplicateEmission e;
  e.family = family;
  e.pi = zero_inflated(family) ? j.at("pi").get<double>() : 1.0;
  e.bg_mean = j.at("bg_mean").get<double>();
  e.sig_mean = j.at("sig_mean").get<double>();
  if (negative_binomial(family)) {
    e.bg_dispersion = j.at("bg_dispersion").get<double>();
    e.sig_dispersion = j.at("sig_dispersion").get<double>();
  }
  return e;
}

// Alternating run lengths, the first run being state 0 (possibly empty).
json encode_states(const std::vector<std::uint8_t> &x) {
  json runs = json::array();
  std::uint8_t cur = 0;
  std::size_t len = 0;
  for (auto v : x) {
    if (v != cur) {
      runs.push_back(len);
      cur = v;
      len = 0;
    }
    ++len;
  }
  runs.push_back(len);
  return runs;
}

std::vector<std::uint8_t> decode_states(const json &runs, std::size_t bins) {
  std::vector<std::uint8_t> x;
  std::uint8_t cur = 0;
  for (const auto &r : runs) {
    x.insert(x.end(), r.get<std::size_t>(), cur);
    cur ^= 1;
  }
  if (x.size() != bins)
    throw dimension_error("checkpoint state vector covers " + std::to_string(x.size()) +
                          " bins, data has " + std::to_string(bins));
  return x;
}

CountMatrix load_counts(const std::string &path, const std::string &exclude) {
  auto in = open_in(path);
  auto m = read_counts(in, path);
  if (!exclude.empty()) {
    auto bin = open_in(exclude);
    m = apply_exclusions(m, parse_bed(bin, exclude));
  }
  return m;
}

ExperimentDesign load_design(const std::string &path, const CountMatrix &m) {
  if (path.empty())
    return ExperimentDesign::pooled(m);
  auto in = open_in(path);
  return read_design(in, path);
}

Scenario load_scenario(const std::string &spec) {
  if (std::filesystem::exists(spec)) {
    auto in = open_in(spec);
    return read_scenario(in, spec);
  }
  return builtin_scenario(spec);
}

void print(const json &j) { std::cout << j.dump(2) << '\n'; }

// ---------------------------------------------------------------------------

struct BinArgs {
  std::vector<std::string> reads;
  std::vector<std::string> labels;
  std::string genome, out, exclude;
  std::uint64_t width = 200;
};

void run_bin(const BinArgs &a) {
  if (!a.labels.empty() && a.labels.size() != a.reads.size())
    throw invalid_parameter("give one --label per --reads file");
  auto gin = open_in(a.genome);
  const auto genome = read_genome(gin, a.genome);
  CountMatrix m;
  json cols = json::array();
  for (std::size_t k = 0; k < a.reads.size(); ++k) {
    auto rin = open_in(a.reads[k]);
    auto b = bin_reads(rin, genome, a.width, a.reads[k]);
    if (k == 0)
      m = CountMatrix(b.bins, {});
    const std::string label =
        a.labels.empty() ? std::filesystem::path(a.reads[k]).stem().string() : a.labels[k];
    for (const auto &w : b.warnings)
      std::cerr << "warning: " << w << '\n';
    cols.push_back({{"label", label},
                    {"reads", b.reads},
                    {"binned", b.reads - b.skipped},
                    {"skipped", b.skipped}});
    m.add_column(label, std::move(b.counts));
  }
  std::size_t before = m.n_bins();
  if (!a.exclude.empty()) {
    auto bin = open_in(a.exclude);
    m = apply_exclusions(m, parse_bed(bin, a.exclude));
  }
  write_with(a.out, [&](std::ostream &os) { write_counts(os, m); });
  print({{"command", "bin"},
         {"width", a.width},
         {"bins", m.n_bins()},
         {"excluded_bins", before - m.n_bins()},
         {"segments", m.segments().size()},
         {"columns", cols},
         {"output", a.out}});
}

// ---------------------------------------------------------------------------

struct FitMrfArgs {
  std::string counts, design, priors, exclude, out, trace, checkpoint, resume;
  std::string family = "zinb";
  bool constrained = false;
  std::size_t iters = 10000, burnin = 5000, thin = 1;
  std::uint64_t seed = 1;
};

void restore(MrfSampler &s, const json &ck, Family family, bool constrained) {
  if (ck.at("format").get<std::string>() != "chipmrf-checkpoint")
    throw parse_error("not a chipmrf checkpoint");
  if (parse_family(ck.at("family").get<std::string>()) != family)
    throw invalid_parameter("checkpoint family differs from --family");
  if (ck.at("constrained").get<bool>() != constrained)
    throw invalid_parameter("checkpoint and run disagree on --constrained");
  const auto &conds = ck.at("conditions");
  if (conds.size() != s.n_conditions())
    throw dimension_error("checkpoint has " + std::to_string(conds.size()) +
                          " conditions, design has " + std::to_string(s.n_conditions()));
  for (std::size_t c = 0; c < conds.size(); ++c) {
    const auto &j = conds[c];
    s.set_states(c, decode_states(j.at("states"), s.n_bins()));
    std::vector<ReplicateEmission> e;
    for (const auto &r : j.at("emissions"))
      e.push_back(emission_from_json(r, family));
    s.set_emissions(c, e);
    if (!constrained)
      s.set_chain(c, {j.at("q0").get<double>(), j.at("q1").get<double>()});
  }
  if (constrained)
    s.set_constrained({ck.at("shared_s").get<double>(),
                       ck.at("constrained_q0").get<std::vector<double>>()});
}

json checkpoint_of(const MrfSampler &s, const std::vector<std::string> &labels,
                   const ExperimentDesign &design, Family family, const FitMrfArgs &a) {
  json ck{{"format", "chipmrf-checkpoint"},
          {"version", 1},
          {"family", to_string(family)},
          {"constrained", a.constrained},
          {"seed", a.seed},
          {"iterations", a.iters},
          {"bins", s.n_bins()}};
  json conds = json::array();
  for (std::size_t c = 0; c < s.n_conditions(); ++c) {
    const auto q = s.chain(c);
    json e = json::array();
    const auto em = s.emissions(c);
    for (std::size_t r = 0; r < em.size(); ++r)
      e.push_back(emission_json(design.conditions[c].replicates[r], em[r]));
    conds.push_back({{"label", labels[c]},
                     {"q0", q.q0},
                     {"q1", q.q1},
                     {"emissions", e},
                     {"states", encode_states(s.states(c))}});
  }
  ck["conditions"] = conds;
  if (a.constrained) {
    ck["shared_s"] = s.constrained().s;
    ck["constrained_q0"] = s.constrained().q0;
  }
  return ck;
}

void run_fit_mrf(const FitMrfArgs &a) {
  const auto family = parse_family(a.family);
  const auto data = load_counts(a.counts, a.exclude);
  const auto design = load_design(a.design, data);
  PriorConfig priors;
  if (!a.priors.empty()) {
    auto in = open_in(a.priors);
    priors = read_priors(in, a.priors);
  }
  SamplerConfig cfg;
  cfg.iterations = a.iters;
  cfg.burn_in = a.burnin;
  cfg.thinning = a.thin;
  cfg.seed = a.seed;
  cfg.constrained = a.constrained;

  MrfSampler sampler(data, design, family, priors, cfg);
  if (!a.resume.empty()) {
    auto in = open_in(a.resume);
    restore(sampler, json::parse(in), family, a.constrained);
  }
  const auto post = sampler.run();

  write_with(a.out, [&](std::ostream &os) {
    write_posterior(os, data.bins(), post.conditions, post.prob_enriched);
  });
  if (!a.trace.empty())
    write_with(a.trace, [&](std::ostream &os) { write_trace(os, post.trace); });
  if (!a.checkpoint.empty())
    write_file(a.checkpoint,
               checkpoint_of(sampler, post.conditions, design, family, a).dump(1) + "\n");

  json params = json::object();
  for (const auto &p : post.parameters)
    params[p.name] = {{"mean", number(p.mean)},
                      {"q025", number(p.q025)},
                      {"median", number(p.median)},
                      {"q975", number(p.q975)}};
  json acc = json::object();
  for (const auto &[k, v] : post.acceptance)
    acc[k] = v;
  json conds = json::array();
  for (std::size_t c = 0; c < post.conditions.size(); ++c) {
    const auto &p = post.prob_enriched[c];
    conds.push_back({{"label", post.conditions[c]},
                     {"replicates", design.conditions[c].replicates},
                     {"mean_posterior", std::accumulate(p.begin(), p.end(), 0.0) /
                                            static_cast<double>(p.size())}});
  }
  print({{"command", "fit-mrf"},
         {"family", to_string(family)},
         {"constrained", a.constrained},
         {"seed", a.seed},
         {"iterations", a.iters},
         {"burn_in", a.burnin},
         {"thinning", a.thin},
         {"retained", post.retained},
         {"bins", data.n_bins()},
         {"segments", data.segments().size()},
         {"resumed", !a.resume.empty()},
         {"conditions", conds},
         {"parameters", params},
         {"acceptance", acc},
         {"output", a.out}});
}

// ---------------------------------------------------------------------------

struct FitMixArgs {
  std::string counts, design, exclude, out, bic;
  std::string family = "zinb";
  double tol = 1e-6;
  std::size_t max_iter = 20000;
  std::uint64_t seed = 1; // accepted for uniformity; EM is deterministic
};

void run_fit_mix(const FitMixArgs &a) {
  const auto family = parse_family(a.family);
  const auto data = load_counts(a.counts, a.exclude);
  const auto design = load_design(a.design, data);
  EmOptions opt;
  opt.tol = a.tol;
  opt.max_iter = a.max_iter;
  const auto fits = fit_em(data, design, family, opt);

  std::vector<std::string> names;
  std::vector<std::vector<double>> tracks;
  json conds = json::array();
  for (std::size_t c = 0; c < fits.size(); ++c) {
    const auto &f = fits[c];
    const auto &cond = design.conditions[c];
    names.push_back(cond.label);
    tracks.push_back(f.responsibilities);
    json em = json::array();
    for (std::size_t r = 0; r < f.params.emissions.size(); ++r)
      em.push_back(emission_json(cond.replicates[r], f.params.emissions[r]));
    const int k = mixture_param_count(family, cond.replicates.size());
    conds.push_back({{"label", cond.label},
                     {"p", f.params.p},
                     {"loglik", f.loglik},
                     {"parameters", k},
                     {"bic", bic(f.loglik, k, static_cast<double>(data.n_bins()))},
                     {"iterations", f.iterations},
                     {"converged", f.converged},
                     {"emissions", em}});
  }
  write_with(a.out, [&](std::ostream &os) { write_posterior(os, data.bins(), names, tracks); });

  const auto rows = bic_table(data, opt);
  if (!a.bic.empty())
    write_with(a.bic, [&](std::ostream &os) { write_bic_table(os, rows); });
  json bic_rows = json::array();
  for (const auto &r : rows)
    bic_rows.push_back({{"experiment", r.experiment},
                        {"bins", r.bins},
                        {"loglik_nb_nb", r.loglik_nb},
                        {"loglik_zinb_nb", r.loglik_zinb},
                        {"bic_nb_nb", r.bic_nb},
                        {"bic_zinb_nb", r.bic_zinb},
                        {"preferred", r.bic_zinb < r.bic_nb ? "zinb-nb" : "nb-nb"}});
  print({{"command", "fit-mix"},
         {"family", to_string(family)},
         {"bins", data.n_bins()},
         {"conditions", conds},
         {"bic", bic_rows},
         {"output", a.out}});
}

// ---------------------------------------------------------------------------

struct OverlapCounts {
  std::size_t regions = 0; // called regions touching a reference interval
  std::size_t bins = 0;    // called bins touching a reference interval
  std::size_t reference_hit = 0; // reference intervals touched by a called region
};

OverlapCounts overlaps(std::span<const RegionCall> regions, std::span<const Bin> bins,
                       std::span<const std::size_t> called, std::span<const BedInterval> ref) {
  const auto hit = [&](const std::string &chrom, std::uint64_t s, std::uint64_t e) {
    for (const auto &r : ref)
      if (r.chrom == chrom && r.start < e && s < r.end)
        return true;
    return false;
  };
  OverlapCounts o;
  for (const auto &r : regions)
    o.regions += hit(r.chrom, r.start, r.end);
  for (auto m : called)
    o.bins += hit(bins[m].chrom, bins[m].start, bins[m].end);
  for (const auto &iv : ref)
    for (const auto &r : regions)
      if (r.chrom == iv.chrom && r.start < iv.end && iv.start < r.end) {
        ++o.reference_hit;
        break;
      }
  return o;
}

struct CallArgs {
  std::string posterior, track, bed, bedgraph, compare;
  double fdr = 0.05;
  std::uint64_t seed = 1; // accepted for uniformity; calling is deterministic
};

std::size_t track_index(const PosteriorTable &t, const std::string &name) {
  if (name.empty())
    return 0;
  for (std::size_t k = 0; k < t.names.size(); ++k)
    if (t.names[k] == name)
      return k;
  throw dimension_error("posterior file has no track '" + name + "'");
}

void run_call(const CallArgs &a) {
  auto in = open_in(a.posterior);
  const auto t = read_posterior(in, a.posterior);
  const auto k = track_index(t, a.track);
  const auto &p = t.tracks[k];
  const auto call = fdr_call(p, a.fdr);
  const auto regions = merge_regions(call.called, t.bins, p);
  if (!a.bed.empty())
    write_with(a.bed, [&](std::ostream &os) { write_bed(os, regions, t.names[k] + "_peak"); });
  if (!a.bedgraph.empty())
    write_with(a.bedgraph, [&](std::ostream &os) { write_bedgraph(os, t.bins, p, t.names[k]); });
  json out{{"command", "call"},
           {"track", t.names[k]},
           {"alpha", a.fdr},
           {"bins", p.size()},
           {"discoveries", call.discoveries},
           {"threshold", call.threshold},
           {"expected_fdr", call.expected_fdr},
           {"regions", regions.size()}};
  if (!a.compare.empty()) {
    auto cin = open_in(a.compare);
    const auto ref = parse_bed(cin, a.compare);
    const auto o = overlaps(regions, t.bins, call.called, ref);
    out["overlap"] = {{"reference_intervals", ref.size()},
                      {"regions_overlapping", o.regions},
                      {"bins_overlapping", o.bins},
                      {"reference_overlapped", o.reference_hit}};
  }
  print(out);
}

// ---------------------------------------------------------------------------

struct DiffArgs {
  std::string posterior, cond1, cond2, bed, bedgraph;
  double fdr = 0.05;
  std::uint64_t seed = 1; // accepted for uniformity
};

void run_diff(const DiffArgs &a) {
  auto in = open_in(a.posterior);
  const auto t = read_posterior(in, a.posterior);
  if (t.names.size() < 2 && (a.cond1.empty() || a.cond2.empty()))
    throw dimension_error("differential calls need two posterior tracks");
  const auto k1 = a.cond1.empty() ? 0 : track_index(t, a.cond1);
  const auto k2 = a.cond2.empty() ? 1 : track_index(t, a.cond2);
  if (k1 == k2)
    throw invalid_parameter("the two conditions must differ");
  const auto d = call_differential(t.tracks[k1], t.tracks[k2], a.fdr);
  const auto regions =
      merge_regions(d.call.called, t.bins, d.probabilities, CallType::differential);
  const std::string name = t.names[k1] + "_vs_" + t.names[k2];
  if (!a.bed.empty())
    write_with(a.bed, [&](std::ostream &os) { write_bed(os, regions, name + "_diff"); });
  if (!a.bedgraph.empty())
    write_with(a.bedgraph,
               [&](std::ostream &os) { write_bedgraph(os, t.bins, d.probabilities, name); });
  print({{"command", "diff"},
         {"condition1", t.names[k1]},
         {"condition2", t.names[k2]},
         {"alpha", a.fdr},
         {"bins", t.bins.size()},
         {"discoveries", d.call.discoveries},
         {"threshold", d.call.threshold},
         {"expected_fdr", d.call.expected_fdr},
         {"regions", regions.size()}});
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string scenario, out, truth, design_out, scenario_out;
  std::size_t bins = 0;
  std::size_t differential = 0;
  bool two_conditions = false;
  std::uint64_t seed = 1;
};

void run_simulate(const SimulateArgs &a) {
  auto s = load_scenario(a.scenario);
  if (a.bins)
    s.bins = a.bins;
  Rng rng(derive_seed(a.seed, "simulate"));
  json out{{"command", "simulate"}, {"scenario", s.name}, {"seed", a.seed}, {"bins", s.bins}};
  const auto fraction = [](const std::vector<std::uint8_t> &x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  };
  if (a.two_conditions) {
    const auto d = generate_two_conditions(s, a.differential, rng);
    write_with(a.out, [&](std::ostream &os) { write_counts(os, d.data); });
    if (!a.truth.empty())
      write_with(a.truth, [&](std::ostream &os) {
        write_posterior(os, d.data.bins(), std::vector<std::string>{"cond1", "cond2"},
                        std::vector<std::vector<double>>{
                            {d.truth1.states.begin(), d.truth1.states.end()},
                            {d.truth2.states.begin(), d.truth2.states.end()}});
      });
    if (!a.design_out.empty())
      write_with(a.design_out, [&](std::ostream &os) { write_design(os, d.design); });
    out["columns"] = d.data.labels();
    out["enriched_fraction"] = {fraction(d.truth1.states), fraction(d.truth2.states)};
    out["differential_bins"] = d.differential;
  } else {
    const auto d = generate(s, rng);
    write_with(a.out, [&](std::ostream &os) { write_counts(os, d.data); });
    if (!a.truth.empty())
      write_with(a.truth, [&](std::ostream &os) {
        write_posterior(os, d.data.bins(), std::vector<std::string>{"truth"},
                        std::vector<std::vector<double>>{
                            {d.truth.states.begin(), d.truth.states.end()}});
      });
    out["columns"] = d.data.labels();
    out["enriched_fraction"] = fraction(d.truth.states);
  }
  if (!a.scenario_out.empty())
    write_with(a.scenario_out, [&](std::ostream &os) { write_scenario(os, s); });
  out["output"] = a.out;
  print(out);
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string scenario, table, tsv;
  std::vector<std::string> methods{"mrf", "mixture"};
  std::size_t reps = 20, threads = 1, bins = 0, iters = 10000, burnin = 5000;
  double fdr = 0.05;
  std::uint64_t seed = 1;
};

void run_bench(const BenchArgs &a) {
  auto s = load_scenario(a.scenario);
  if (a.bins)
    s.bins = a.bins;
  BenchmarkConfig cfg;
  cfg.reps = a.reps;
  cfg.alpha = a.fdr;
  cfg.seed = a.seed;
  cfg.threads = a.threads;
  cfg.sampler.iterations = a.iters;
  cfg.sampler.burn_in = a.burnin;
  cfg.methods.clear();
  for (const auto &m : a.methods)
    cfg.methods.push_back(parse_method(m));
  const auto res = run_benchmark(s, cfg);
  if (!a.table.empty())
    write_with(a.table, [&](std::ostream &os) { write_benchmark_text(os, res); });
  if (!a.tsv.empty())
    write_with(a.tsv, [&](std::ostream &os) { write_benchmark_tsv(os, res); });

  json methods = json::array();
  for (std::size_t k = 0; k < res.methods.size(); ++k) {
    const auto &m = res.methods[k];
    json j{{"method", to_string(m.method)},
           {"mean_fndr", number(m.mean_fndr())},
           {"mean_fdr", number(m.mean_fdr())},
           {"mean_called", number(m.mean_called())},
           {"completed", m.fndr.size()},
           {"failures", m.failures}};
    if (k > 0)
      j["p_value_vs_first"] = res.p_values[k - 1] ? json(*res.p_values[k - 1]) : json(nullptr);
    methods.push_back(j);
  }
  print({{"command", "bench"},
         {"scenario", res.scenario},
         {"bins", s.bins},
         {"reps", res.reps},
         {"alpha", res.alpha},
         {"seed", a.seed},
         {"methods", methods}});
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Markov random field enrichment and differential binding for ChIP-seq counts"};
  app.require_subcommand(1);

  BinArgs bin;
  auto *c_bin = app.add_subcommand("bin", "count reads by first position in fixed-width bins");
  c_bin->add_option("--reads", bin.reads, "reads TSV: chrom, 0-based position")->required();
  c_bin->add_option("--label", bin.labels, "column label per reads file (default: file stem)");
  c_bin->add_option("--genome", bin.genome, "chromosome lengths")->required();
  c_bin->add_option("--width", bin.width, "bin width in bp")->check(CLI::PositiveNumber);
  c_bin->add_option("--exclude", bin.exclude, "BED of regions to drop");
  c_bin->add_option("--out", bin.out, "counts TSV")->required();

  FitMrfArgs mrf;
  auto *c_mrf = app.add_subcommand("fit-mrf", "fit the hidden MRF by MCMC");
  c_mrf->add_option("--counts", mrf.counts, "counts TSV")->required();
  c_mrf->add_option("--design", mrf.design, "design config (default: all columns pooled)");
  c_mrf->add_option("--family", mrf.family, "zip | zinb | pois | nb");
  c_mrf->add_flag("--constrained", mrf.constrained, "shared stationary probability");
  c_mrf->add_option("--iters", mrf.iters, "total iterations");
  c_mrf->add_option("--burnin", mrf.burnin, "burn-in iterations");
  c_mrf->add_option("--thin", mrf.thin, "keep every k-th draw");
  c_mrf->add_option("--seed", mrf.seed);
  c_mrf->add_option("--priors", mrf.priors, "prior config");
  c_mrf->add_option("--exclude", mrf.exclude, "BED of regions to drop");
  c_mrf->add_option("--out", mrf.out, "posterior TSV")->required();
  c_mrf->add_option("--trace", mrf.trace, "trace TSV of retained draws");
  c_mrf->add_option("--checkpoint", mrf.checkpoint, "write final sampler state (JSON)");
  c_mrf->add_option("--resume", mrf.resume, "start from a checkpoint");

  FitMixArgs mix;
  auto *c_mix = app.add_subcommand("fit-mix", "fit the independent mixture by EM, with BIC");
  c_mix->add_option("--counts", mix.counts, "counts TSV")->required();
  c_mix->add_option("--design", mix.design, "design config (default: all columns pooled)");
  c_mix->add_option("--family", mix.family, "zip | zinb | pois | nb");
  c_mix->add_option("--tol", mix.tol, "log-likelihood gain tolerance");
  c_mix->add_option("--max-iter", mix.max_iter);
  c_mix->add_option("--seed", mix.seed);
  c_mix->add_option("--exclude", mix.exclude, "BED of regions to drop");
  c_mix->add_option("--out", mix.out, "posterior TSV")->required();
  c_mix->add_option("--bic", mix.bic, "per-column NB-NB vs ZINB-NB BIC table");

  CallArgs call;
  auto *c_call = app.add_subcommand("call", "call enriched regions at an expected FDR");
  c_call->add_option("--posterior", call.posterior, "posterior TSV")->required();
  c_call->add_option("--track", call.track, "posterior column (default: first)");
  c_call->add_option("--fdr", call.fdr)->check(CLI::Range(0.0, 1.0));
  c_call->add_option("--bed", call.bed, "called regions (BED6)");
  c_call->add_option("--bedgraph", call.bedgraph, "posterior track");
  c_call->add_option("--compare", call.compare, "BED to count overlaps against");
  c_call->add_option("--seed", call.seed);

  DiffArgs diff;
  auto *c_diff = app.add_subcommand("diff", "call differentially bound regions");
  c_diff->add_option("--posterior", diff.posterior, "posterior TSV with two tracks")->required();
  c_diff->add_option("--cond1", diff.cond1);
  c_diff->add_option("--cond2", diff.cond2);
  c_diff->add_option("--fdr", diff.fdr)->check(CLI::Range(0.0, 1.0));
  c_diff->add_option("--bed", diff.bed);
  c_diff->add_option("--bedgraph", diff.bedgraph, "P(differential) track");
  c_diff->add_option("--seed", diff.seed);

  SimulateArgs sim;
  auto *c_sim = app.add_subcommand("simulate", "simulate counts from a scenario");
  c_sim->add_option("--scenario", sim.scenario, "scenario config or built-in name")->required();
  c_sim->add_option("--bins", sim.bins, "override the bin count");
  auto *o_diff = c_sim->add_option("--differential", sim.differential,
                                   "two conditions with this many differing bins");
  c_sim->add_option("--seed", sim.seed);
  c_sim->add_option("--out", sim.out, "counts TSV")->required();
  c_sim->add_option("--truth", sim.truth, "latent truth TSV");
  c_sim->add_option("--design-out", sim.design_out, "design config (two conditions)");
  c_sim->add_option("--scenario-out", sim.scenario_out, "resolved scenario config");

  BenchArgs bench;
  auto *c_bench = app.add_subcommand("bench", "repeated simulate / fit / call / score");
  c_bench->add_option("--scenario", bench.scenario, "scenario config or built-in name")
      ->required();
  c_bench->add_option("--reps", bench.reps);
  c_bench->add_option("--fdr", bench.fdr)->check(CLI::Range(0.0, 1.0));
  c_bench->add_option("--seed", bench.seed);
  c_bench->add_option("--threads", bench.threads);
  c_bench->add_option("--methods", bench.methods, "mrf, mixture")->delimiter(',');
  c_bench->add_option("--bins", bench.bins, "override the bin count");
  c_bench->add_option("--iters", bench.iters, "MCMC iterations");
  c_bench->add_option("--burnin", bench.burnin, "MCMC burn-in");
  c_bench->add_option("--table", bench.table, "aligned text table");
  c_bench->add_option("--tsv", bench.tsv, "per-repetition TSV");

  const auto fail = [](const std::string &kind, const std::string &msg, int code) {
    std::cerr << json{{"error", kind}, {"message", msg}}.dump() << '\n';
    return code;
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::Error &e) {
    return fail("usage", e.what(), 2);
  }

  try {
    if (*c_bin)
      run_bin(bin);
    else if (*c_mrf)
      run_fit_mrf(mrf);
    else if (*c_mix)
      run_fit_mix(mix);
    else if (*c_call)
      run_call(call);
    else if (*c_diff)
      run_diff(diff);
    else if (*c_sim) {
      sim.two_conditions = o_diff->count() > 0;
      run_simulate(sim);
    } else if (*c_bench)
      run_bench(bench);
  } catch (const error &e) {
    return fail(e.kind(), e.what(), 1);
  } catch (const json::exception &e) {
    return fail("parse", e.what(), 1);
  } catch (const std::exception &e) {
    return fail("internal", e.what(), 1);
  }
  return 0;
}
