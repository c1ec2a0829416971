#include <fstream>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "chipmrf/config.hpp"
#include "chipmrf/io.hpp"
#include "stats.hpp"

using namespace chipmrf;

namespace {

std::string fixture(const std::string &name) {
  return std::string(CHIPMRF_FIXTURES) + "/" + name;
}

std::string slurp(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::ifstream open_fixture(const std::string &name) {
  std::ifstream in(fixture(name));
  if (!in)
    throw std::runtime_error("missing fixture " + name);
  return in;
}

template <class F> std::string parse_error_of(F &&f) {
  try {
    f();
  } catch (const parse_error &e) {
    return e.what();
  }
  return "";
}

} // namespace

TEST(BinReads, BoundaryArithmetic) {
  const std::vector<ChromLength> g{{"chr1", 1000}};
  std::istringstream reads("chr1\t0\nchr1\t199\nchr1\t200\n");
  const auto b = bin_reads(reads, g, 200);
  ASSERT_EQ(b.counts.size(), 5u);
  EXPECT_EQ(b.counts[0], 2u);
  EXPECT_EQ(b.counts[1], 1u);
  EXPECT_EQ(std::accumulate(b.counts.begin() + 2, b.counts.end(), 0u), 0u);
}

TEST(BinReads, EmptyStreamGivesZeros) {
  const std::vector<ChromLength> g{{"chr1", 1001}};
  std::istringstream reads("");
  const auto b = bin_reads(reads, g, 200);
  EXPECT_EQ(b.counts.size(), 6u);
  EXPECT_EQ(b.bins.back().end, 1001u);
  for (auto c : b.counts)
    EXPECT_EQ(c, 0u);
}

TEST(BinReads, FixtureSkipsAndConserves) {
  auto gin = open_fixture("genome.tsv");
  const auto g = read_genome(gin);
  auto rin = open_fixture("reads.tsv");
  const auto b = bin_reads(rin, g, 200, "reads.tsv");
  EXPECT_EQ(b.reads, 9u);
  EXPECT_EQ(b.skipped, 2u); // chr2:1000 is past the end, chrX is unknown
  ASSERT_EQ(b.warnings.size(), 2u);
  EXPECT_NE(b.warnings[0].find("reads.tsv:8"), std::string::npos);
  EXPECT_EQ(std::accumulate(b.counts.begin(), b.counts.end(), std::size_t{0}),
            b.reads - b.skipped);
  EXPECT_EQ(b.counts[0], 2u);
  EXPECT_EQ(b.counts[3], 1u);  // 642
  EXPECT_EQ(b.counts[9], 1u);  // 1999
  EXPECT_EQ(b.counts[12], 1u); // chr2:450
  EXPECT_EQ(b.bins[10].segment, 1u);
}

TEST(BinReads, UniformPositionsAreUniform) {
  const std::uint64_t L = 10000000, w = 200;
  const std::vector<ChromLength> g{{"chr1", L}};
  Rng rng(12);
  std::string text;
  text.reserve(14 * 1000000);
  for (int i = 0; i < 1000000; ++i) {
    text += "chr1\t";
    text += std::to_string(static_cast<std::uint64_t>(uniform01(rng) * L));
    text += '\n';
  }
  std::istringstream reads(std::move(text));
  const auto b = bin_reads(reads, g, w);
  ASSERT_EQ(b.counts.size(), L / w);
  const double expected = 1e6 / static_cast<double>(b.counts.size());
  EXPECT_DOUBLE_EQ(expected, 20.0);
  double chi2 = 0.0;
  for (auto c : b.counts)
    chi2 += (c - expected) * (c - expected) / expected;
  const boost::math::chi_squared dist(static_cast<double>(b.counts.size() - 1));
  EXPECT_GT(boost::math::cdf(boost::math::complement(dist, chi2)), 1e-3);
  EXPECT_EQ(b.skipped, 0u);
}

TEST(BinReads, MalformedLine) {
  const std::vector<ChromLength> g{{"chr1", 1000}};
  std::istringstream reads("chr1\t5\nchr1\tfive\n");
  const auto msg = parse_error_of([&] { bin_reads(reads, g, 200, "r.tsv"); });
  EXPECT_NE(msg.find("r.tsv:2"), std::string::npos) << msg;
}

TEST(Genome, Errors) {
  std::istringstream dup("chr1 100\nchr1 200\n");
  EXPECT_NE(parse_error_of([&] { read_genome(dup, "g"); }).find("g:2"), std::string::npos);
  std::istringstream empty("# nothing\n");
  EXPECT_THROW(read_genome(empty), parse_error);
  std::istringstream zero("chr1 0\n");
  EXPECT_THROW(read_genome(zero), parse_error);
}

TEST(Bed, ParsesAndReportsLineNumbers) {
  auto in = open_fixture("exclude.bed");
  const auto bed = parse_bed(in);
  ASSERT_EQ(bed.size(), 2u);
  EXPECT_EQ(bed[0].chrom, "chr1");
  EXPECT_EQ(bed[0].start, 1000u);
  EXPECT_EQ(bed[0].end, 1450u);
  EXPECT_EQ(bed[0].name, "satellite");

  std::istringstream bad("chr1\t0\t10\nchr1\t50\n");
  EXPECT_NE(parse_error_of([&] { parse_bed(bad, "x.bed"); }).find("x.bed:2"), std::string::npos);
  std::istringstream reversed("chr1\t50\t10\n");
  EXPECT_THROW(parse_bed(reversed), parse_error);
}

namespace {

CountMatrix ten_bins() {
  CountMatrix m(tile_bins("chr1", 2000, 200), {});
  std::vector<count_t> v(10);
  std::iota(v.begin(), v.end(), 1u);
  m.add_column("a", v);
  return m;
}

} // namespace

TEST(Exclusions, SplitsSegment) {
  const auto m = ten_bins();
  // bins 5-7 (1-based) are [800, 1400)
  const std::vector<BedInterval> ex{{"chr1", 800, 1400, ""}};
  const auto out = apply_exclusions(m, ex);
  ASSERT_EQ(out.n_bins(), 7u);
  const auto segs = out.segments();
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_EQ(segs[0].size(), 4u);
  EXPECT_EQ(segs[1].size(), 3u);
  EXPECT_EQ(out.column(0)[4], 8u);
}

TEST(Exclusions, EmptyIsIdentity) {
  const auto m = ten_bins();
  const auto out = apply_exclusions(m, std::vector<BedInterval>{});
  EXPECT_EQ(out.bins(), m.bins());
  EXPECT_TRUE(std::ranges::equal(out.column(0), m.column(0)));
}

TEST(Exclusions, AnyOverlapRemoves) {
  const auto m = ten_bins();
  const std::vector<BedInterval> ex{{"chr1", 399, 401, ""}, {"chr2", 0, 5000, ""}};
  const auto out = apply_exclusions(m, ex);
  EXPECT_EQ(out.n_bins(), 8u);
  EXPECT_EQ(out.bins()[0].end, 200u);
  EXPECT_EQ(out.bins()[1].start, 600u);
  for (const auto &b : out.bins())
    EXPECT_FALSE(b.start < 401 && b.end > 399);
}

TEST(Exclusions, NeverMergesSegments) {
  auto in = open_fixture("counts.tsv");
  const auto m = read_counts(in);
  auto bin = open_fixture("exclude.bed");
  const auto ex = parse_bed(bin);
  const auto out = apply_exclusions(m, ex);
  for (std::size_t i = 1; i < out.n_bins(); ++i) {
    const auto &a = out.bins()[i - 1], &b = out.bins()[i];
    if (a.chrom != b.chrom || a.end != b.start) {
      EXPECT_NE(a.segment, b.segment);
    }
  }
  // chr1 [1000,1450) removes three bins; chr2 [0,1) one
  EXPECT_EQ(out.n_bins(), m.n_bins() - 4);
  EXPECT_EQ(out.segments().size(), 3u);
}

TEST(Counts, FixtureRoundTripIsByteIdentical) {
  const auto text = slurp(fixture("counts.tsv"));
  std::istringstream in(text);
  const auto m = read_counts(in);
  EXPECT_EQ(m.n_bins(), 15u);
  EXPECT_EQ(m.labels(), (std::vector<std::string>{"t0_rep1", "t0_rep2", "t30_rep1"}));
  EXPECT_EQ(m.segments().size(), 2u);
  std::ostringstream out;
  write_counts(out, m);
  EXPECT_EQ(out.str(), text);
}

TEST(Counts, CrlfAcceptedAndNormalized) {
  std::istringstream in("chrom\tstart\tend\ta\r\nchr1\t0\t200\t3\r\nchr1\t200\t400\t0\r\n");
  const auto m = read_counts(in);
  std::ostringstream out;
  write_counts(out, m);
  EXPECT_EQ(out.str(), "chrom\tstart\tend\ta\nchr1\t0\t200\t3\nchr1\t200\t400\t0\n");
}

TEST(Counts, ParseErrors) {
  const auto err = [](const std::string &text) {
    std::istringstream in(text);
    return parse_error_of([&] { read_counts(in, "c.tsv"); });
  };
  EXPECT_NE(err("chrom\tstart\tend\ta\nchr1\t0\t200\n").find("c.tsv:2"), std::string::npos);
  EXPECT_NE(err("chrom\tstart\tend\ta\nchr1\t0\t200\t1.5\n").find("not a non-negative"),
            std::string::npos);
  EXPECT_NE(err("chrom\tstart\tend\ta\nchr1\t0\t200\t-1\n").find("c.tsv:2"), std::string::npos);
  EXPECT_NE(err("chrom\tstart\tend\ta\nchr1\t200\t400\t1\nchr1\t0\t200\t1\n").find("c.tsv:3"),
            std::string::npos);
  EXPECT_NE(err("chrom\tstart\tend\ta\nchr1\t0\t200\t1\nchr2\t0\t200\t1\nchr1\t400\t600\t1\n")
                .find("two blocks"),
            std::string::npos);
  EXPECT_FALSE(err("bin\tstart\tend\ta\n").empty());
  EXPECT_FALSE(err("").empty());
}

TEST(Counts, GapStartsSegment) {
  std::istringstream in("chrom\tstart\tend\ta\nchr1\t0\t200\t1\nchr1\t400\t600\t1\n");
  const auto m = read_counts(in);
  EXPECT_EQ(m.segments().size(), 2u);
}

TEST(Counts, DesignMismatchNamesColumn) {
  auto in = open_fixture("counts.tsv");
  const auto m = read_counts(in);
  auto din = open_fixture("design_mismatch.cfg");
  const auto d = read_design(din);
  try {
    resolve_design(d, m);
    FAIL() << "expected a dimension error";
  } catch (const dimension_error &e) {
    EXPECT_NE(std::string(e.what()).find("t0_rep3"), std::string::npos) << e.what();
  }
}

TEST(Posterior, RoundTrip) {
  const auto bins = tile_bins("chr1", 600, 200);
  const std::vector<std::string> names{"t0"};
  const std::vector<std::vector<double>> tracks{{0.1, 1.0, 1.0 / 3.0}};
  std::ostringstream out;
  write_posterior(out, bins, names, tracks);
  std::istringstream in(out.str());
  const auto t = read_posterior(in);
  EXPECT_EQ(t.bins, bins);
  EXPECT_EQ(t.names, names);
  EXPECT_EQ(t.tracks, tracks); // shortest round-trip formatting is exact
  std::istringstream bad("chrom\tstart\tend\tt0\nchr1\t0\t200\t1.5\n");
  EXPECT_THROW(read_posterior(bad), parse_error);
}

TEST(Writers, BedAndBedgraph) {
  const auto bins = tile_bins("chr1", 600, 200);
  const std::vector<RegionCall> regions{{"chr1", 200, 600, 1, 2, 0.9755, CallType::enriched}};
  std::ostringstream bed;
  write_bed(bed, regions, "peak");
  EXPECT_EQ(bed.str(), "chr1\t200\t600\tpeak1\t976\t.\n");
  std::ostringstream bg;
  write_bedgraph(bg, bins, std::vector<double>{0, 0.5, 0.25}, "post");
  EXPECT_EQ(bg.str(), "track type=bedGraph name=\"post\"\nchr1\t0\t200\t0\nchr1\t200\t400\t0.5\n"
                      "chr1\t400\t600\t0.25\n");
}

TEST(Config, DesignFixture) {
  auto in = open_fixture("design.cfg");
  const auto d = read_design(in);
  EXPECT_EQ(d.bin_width, 200u);
  ASSERT_EQ(d.conditions.size(), 2u);
  EXPECT_EQ(d.conditions[0].label, "t0");
  EXPECT_EQ(d.conditions[0].antibody, "CBP");
  EXPECT_EQ(d.conditions[0].replicates, (std::vector<std::string>{"t0_rep1", "t0_rep2"}));
  std::ostringstream out;
  write_design(out, d);
  std::istringstream back(out.str());
  const auto d2 = read_design(back);
  EXPECT_EQ(d2.conditions[1].replicates, d.conditions[1].replicates);

  auto cin = open_fixture("counts.tsv");
  const auto m = read_counts(cin);
  const auto cols = resolve_design(d, m);
  EXPECT_EQ(cols[0], (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(cols[1], (std::vector<std::size_t>{2}));
}

TEST(Config, DesignErrors) {
  const auto err = [](const std::string &text) {
    std::istringstream in(text);
    return parse_error_of([&] { read_design(in, "d.cfg"); });
  };
  EXPECT_NE(err("[condition a]\nreplicates = x\ncolour = red\n").find("d.cfg:3"),
            std::string::npos);
  EXPECT_NE(err("[condition a]\nreplicates = x\nreplicates = y\n").find("duplicate"),
            std::string::npos);
  EXPECT_FALSE(err("bin_width = 200\n").empty());
  EXPECT_FALSE(err("[sample a]\nreplicates = x\n").empty());
  EXPECT_FALSE(err("[condition a\n").empty());
  EXPECT_FALSE(err("bin_width = wide\n[condition a]\nreplicates = x\n").empty());
}

TEST(Config, PriorsFixture) {
  auto in = open_fixture("priors.cfg");
  const auto p = read_priors(in);
  EXPECT_EQ(p.q1.a, 1.0);
  EXPECT_EQ(p.nb_mean.shape, 0.01);
  std::istringstream bad("pi_a = -1\n");
  EXPECT_THROW(read_priors(bad), invalid_parameter);
  std::istringstream unknown("pj_a = 1\n");
  EXPECT_THROW(read_priors(unknown), parse_error);
}

TEST(Config, ScenarioRoundTrip) {
  for (const auto &name : builtin_scenario_names()) {
    const auto s = builtin_scenario(name);
    std::ostringstream out;
    write_scenario(out, s);
    std::istringstream in(out.str());
    const auto back = read_scenario(in);
    EXPECT_EQ(back.name, s.name);
    EXPECT_EQ(back.latent, s.latent);
    EXPECT_EQ(back.family, s.family);
    EXPECT_EQ(back.bins, s.bins);
    EXPECT_EQ(back.replicates, s.replicates) << name;
    if (s.latent == LatentKind::markov) {
      EXPECT_EQ(back.chain.q0, s.chain.q0);
      EXPECT_EQ(back.chain.q1, s.chain.q1);
    } else {
      EXPECT_EQ(back.p, s.p);
    }
  }
}

TEST(Config, ScenarioFixture) {
  auto in = open_fixture("scenario5.cfg");
  const auto s = read_scenario(in, "scenario5.cfg");
  const auto ref = builtin_scenario("scenario5-less");
  EXPECT_EQ(s.replicates, ref.replicates);
  EXPECT_EQ(s.chain.q1, 0.839);
  std::istringstream bad("latent = markov\nq0 = 0.1\n");
  EXPECT_THROW(read_scenario(bad), parse_error);
}
