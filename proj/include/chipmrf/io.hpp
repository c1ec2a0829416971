#ifndef CHIPMRF_IO_HPP
#define CHIPMRF_IO_HPP

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "calling.hpp"
#include "data.hpp"
#include "error.hpp"
#include "inference.hpp"
#include "mixture.hpp"

namespace chipmrf {

/// Shortest representation that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline bool getline_stripped(std::istream &in, std::string &line) {
  if (!std::getline(in, line))
    return false;
  if (!line.empty() && line.back() == '\r')
    line.pop_back();
  return true;
}

inline std::vector<std::string_view> split_tabs(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto t = s.find('\t', pos);
    out.push_back(s.substr(pos, t == std::string_view::npos ? std::string_view::npos : t - pos));
    if (t == std::string_view::npos)
      break;
    pos = t + 1;
  }
  return out;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t'))
      ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t')
      ++j;
    if (j > i)
      out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

template <class T>
bool parse_uint(std::string_view s, T &out) {
  if (s.empty())
    return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline bool is_blank_or_comment(std::string_view s) {
  const auto i = s.find_first_not_of(" \t");
  return i == std::string_view::npos || s[i] == '#';
}

} // namespace detail

// ---------------------------------------------------------------------------
// Genome and reads

struct ChromLength {
  std::string chrom;
  std::uint64_t length;
};

/// Two columns: chromosome name and length. Order is kept.
inline std::vector<ChromLength> read_genome(std::istream &in, const std::string &where = "genome") {
  std::vector<ChromLength> g;
  std::string line;
  std::size_t lineno = 0;
  while (detail::getline_stripped(in, line)) {
    ++lineno;
    if (detail::is_blank_or_comment(line))
      continue;
    const auto f = detail::split_ws(line);
    ChromLength c;
    if (f.size() < 2 || !detail::parse_uint(f[1], c.length) || c.length == 0)
      throw parse_error(where, lineno, "expected '<chrom> <length>'");
    c.chrom = std::string(f[0]);
    for (const auto &o : g)
      if (o.chrom == c.chrom)
        throw parse_error(where, lineno, "chromosome '" + c.chrom + "' listed twice");
    g.push_back(std::move(c));
  }
  if (g.empty())
    throw parse_error(where, lineno, "genome file lists no chromosomes");
  return g;
}

/// Bins of every chromosome in genome order; one segment per chromosome.
inline std::vector<Bin> genome_bins(std::span<const ChromLength> genome, std::uint64_t width) {
  std::vector<Bin> bins;
  for (std::size_t k = 0; k < genome.size(); ++k) {
    auto b = tile_bins(genome[k].chrom, genome[k].length, width, k);
    bins.insert(bins.end(), b.begin(), b.end());
  }
  return bins;
}

struct BinnedReads {
  std::vector<Bin> bins;
  std::vector<count_t> counts;
  std::size_t reads = 0;   // records seen
  std::size_t skipped = 0; // out of bounds or unknown chromosome
  std::vector<std::string> warnings;
};

/// Counts reads by their first position: bin floor(pos / width) of the
/// read's chromosome. Every bin is materialized.
inline BinnedReads bin_reads(std::istream &reads, std::span<const ChromLength> genome,
                             std::uint64_t width, const std::string &where = "reads",
                             std::size_t max_warnings = 20) {
  if (width < 1)
    throw invalid_parameter("bin width must be at least 1");
  BinnedReads out;
  out.bins = genome_bins(genome, width);
  out.counts.assign(out.bins.size(), 0);
  std::map<std::string, std::pair<std::size_t, std::uint64_t>, std::less<>> offset;
  {
    std::size_t first = 0;
    for (const auto &c : genome) {
      offset[c.chrom] = {first, c.length};
      first += (c.length + width - 1) / width;
    }
  }
  auto warn = [&](std::size_t lineno, const std::string &msg) {
    ++out.skipped;
    if (out.warnings.size() < max_warnings)
      out.warnings.push_back(where + ":" + std::to_string(lineno) + ": " + msg);
  };
  std::string line;
  std::size_t lineno = 0;
  while (detail::getline_stripped(reads, line)) {
    ++lineno;
    if (detail::is_blank_or_comment(line))
      continue;
    const auto f = detail::split_ws(line);
    std::uint64_t pos = 0;
    if (f.size() < 2 || !detail::parse_uint(f[1], pos))
      throw parse_error(where, lineno, "expected '<chrom> <position>'");
    ++out.reads;
    const auto it = offset.find(f[0]);
    if (it == offset.end()) {
      warn(lineno, "unknown chromosome '" + std::string(f[0]) + "', read skipped");
      continue;
    }
    if (pos >= it->second.second) {
      warn(lineno, "position " + std::to_string(pos) + " beyond the end of " +
                       std::string(f[0]) + ", read skipped");
      continue;
    }
    ++out.counts[it->second.first + pos / width];
  }
  return out;
}

// ---------------------------------------------------------------------------
// BED intervals and exclusions

struct BedInterval {
  std::string chrom;
  std::uint64_t start;
  std::uint64_t end;
  std::string name;
};

/// BED3 or longer; track/browser headers and comments are skipped.
inline std::vector<BedInterval> parse_bed(std::istream &in, const std::string &where = "bed") {
  std::vector<BedInterval> out;
  std::string line;
  std::size_t lineno = 0;
  while (detail::getline_stripped(in, line)) {
    ++lineno;
    if (detail::is_blank_or_comment(line) || line.starts_with("track") ||
        line.starts_with("browser"))
      continue;
    auto f = detail::split_tabs(line);
    if (f.size() < 3)
      f = detail::split_ws(line);
    BedInterval b;
    if (f.size() < 3)
      throw parse_error(where, lineno, "expected at least 3 fields");
    if (!detail::parse_uint(f[1], b.start) || !detail::parse_uint(f[2], b.end))
      throw parse_error(where, lineno, "start and end must be non-negative integers");
    if (b.end <= b.start)
      throw parse_error(where, lineno, "end must be greater than start");
    b.chrom = std::string(f[0]);
    if (f.size() > 3)
      b.name = std::string(f[3]);
    out.push_back(std::move(b));
  }
  return out;
}

/// Assigns segment ids: a new segment starts at a chromosome change, at a
/// gap between consecutive bins, or where the input segment id changes.
inline void resegment(std::vector<Bin> &bins) {
  std::size_t seg = 0;
  std::size_t prev_seg = 0;
  for (std::size_t m = 0; m < bins.size(); ++m) {
    const std::size_t orig = bins[m].segment;
    if (m > 0 && (bins[m].chrom != bins[m - 1].chrom || bins[m].start != bins[m - 1].end ||
                  orig != prev_seg))
      ++seg;
    prev_seg = orig;
    bins[m].segment = seg;
  }
}

/// Drops every bin that overlaps an excluded interval (any overlap) and
/// re-segments, so removed stretches split chains.
inline CountMatrix apply_exclusions(const CountMatrix &data,
                                    std::span<const BedInterval> excluded) {
  std::map<std::string, std::vector<std::pair<std::uint64_t, std::uint64_t>>, std::less<>> by_chrom;
  for (const auto &e : excluded)
    by_chrom[e.chrom].push_back({e.start, e.end});
  for (auto &[c, v] : by_chrom)
    std::sort(v.begin(), v.end());

  std::vector<std::size_t> keep;
  for (std::size_t m = 0; m < data.n_bins(); ++m) {
    const auto &b = data.bins()[m];
    bool hit = false;
    if (const auto it = by_chrom.find(b.chrom); it != by_chrom.end()) {
      const auto &v = it->second;
      // intervals starting before the bin end; any of them reaching past start overlaps
      auto ub = std::lower_bound(v.begin(), v.end(), std::pair{b.end, std::uint64_t{0}});
      for (auto i = v.begin(); i != ub && !hit; ++i)
        hit = i->second > b.start;
    }
    if (!hit)
      keep.push_back(m);
  }
  std::vector<Bin> bins;
  bins.reserve(keep.size());
  for (auto m : keep)
    bins.push_back(data.bins()[m]);
  resegment(bins);
  CountMatrix out(std::move(bins), {});
  for (std::size_t j = 0; j < data.n_columns(); ++j) {
    const auto col = data.column(j);
    std::vector<count_t> v;
    v.reserve(keep.size());
    for (auto m : keep)
      v.push_back(col[m]);
    out.add_column(data.labels()[j], std::move(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Count matrices

/// Tab-separated: header `chrom start end <labels...>`, one row per bin.
/// Segments follow chromosome changes and gaps.
inline CountMatrix read_counts(std::istream &in, const std::string &where = "counts") {
  std::string line;
  std::size_t lineno = 0;
  while (detail::getline_stripped(in, line)) {
    ++lineno;
    if (!detail::is_blank_or_comment(line))
      break;
    line.clear();
  }
  if (line.empty())
    throw parse_error(where, lineno, "missing header");
  const auto header = detail::split_tabs(line);
  if (header.size() < 4 || header[0] != "chrom" || header[1] != "start" || header[2] != "end")
    throw parse_error(where, lineno, "header must be 'chrom<TAB>start<TAB>end<TAB><labels...>'");
  std::vector<std::string> labels;
  for (std::size_t k = 3; k < header.size(); ++k) {
    if (header[k].empty())
      throw parse_error(where, lineno, "empty column label");
    for (const auto &l : labels)
      if (l == header[k])
        throw parse_error(where, lineno, "duplicate column label '" + l + "'");
    labels.emplace_back(header[k]);
  }
  const std::size_t ncol = labels.size();
  std::vector<Bin> bins;
  std::vector<std::vector<count_t>> cols(ncol);
  std::vector<std::string> seen_chroms;
  while (detail::getline_stripped(in, line)) {
    ++lineno;
    if (line.empty())
      continue;
    const auto f = detail::split_tabs(line);
    if (f.size() != ncol + 3)
      throw parse_error(where, lineno,
                        "expected " + std::to_string(ncol + 3) + " fields, found " +
                            std::to_string(f.size()));
    Bin b{std::string(f[0]), 0, 0, 0};
    if (!detail::parse_uint(f[1], b.start) || !detail::parse_uint(f[2], b.end) ||
        b.end <= b.start)
      throw parse_error(where, lineno, "invalid bin coordinates");
    if (!bins.empty()) {
      const auto &p = bins.back();
      if (p.chrom == b.chrom) {
        if (b.start < p.end)
          throw parse_error(where, lineno, "bins are unsorted or overlapping");
      } else {
        if (std::find(seen_chroms.begin(), seen_chroms.end(), b.chrom) != seen_chroms.end())
          throw parse_error(where, lineno, "bins are unsorted: chromosome '" + b.chrom +
                                               "' appears in two blocks");
      }
    }
    if (bins.empty() || bins.back().chrom != b.chrom)
      seen_chroms.push_back(b.chrom);
    for (std::size_t k = 0; k < ncol; ++k) {
      count_t v;
      if (!detail::parse_uint(f[k + 3], v))
        throw parse_error(where, lineno,
                          "count '" + std::string(f[k + 3]) + "' in column '" + labels[k] +
                              "' is not a non-negative integer");
      cols[k].push_back(v);
    }
    bins.push_back(std::move(b));
  }
  resegment(bins);
  CountMatrix m(std::move(bins), {});
  for (std::size_t k = 0; k < ncol; ++k)
    m.add_column(labels[k], std::move(cols[k]));
  return m;
}

inline void write_counts(std::ostream &os, const CountMatrix &m) {
  os << "chrom\tstart\tend";
  for (const auto &l : m.labels())
    os << '\t' << l;
  os << '\n';
  for (std::size_t i = 0; i < m.n_bins(); ++i) {
    const auto &b = m.bins()[i];
    os << b.chrom << '\t' << b.start << '\t' << b.end;
    for (std::size_t j = 0; j < m.n_columns(); ++j)
      os << '\t' << m.column(j)[i];
    os << '\n';
  }
}

/// Per-bin posterior probabilities, one column per track.
inline void write_posterior(std::ostream &os, std::span<const Bin> bins,
                            std::span<const std::string> names,
                            std::span<const std::vector<double>> tracks) {
  if (names.size() != tracks.size())
    throw dimension_error("track names and tracks differ in number");
  for (const auto &t : tracks)
    if (t.size() != bins.size())
      throw dimension_error("posterior track and bins differ in length");
  os << "chrom\tstart\tend";
  for (const auto &n : names)
    os << '\t' << n;
  os << '\n';
  for (std::size_t m = 0; m < bins.size(); ++m) {
    os << bins[m].chrom << '\t' << bins[m].start << '\t' << bins[m].end;
    for (const auto &t : tracks)
      os << '\t' << format_double(t[m]);
    os << '\n';
  }
}

struct PosteriorTable {
  std::vector<Bin> bins;
  std::vector<std::string> names;
  std::vector<std::vector<double>> tracks;
};

inline PosteriorTable read_posterior(std::istream &in, const std::string &where = "posterior") {
  std::string line;
  std::size_t lineno = 0;
  if (!detail::getline_stripped(in, line))
    throw parse_error(where, 1, "missing header");
  ++lineno;
  const auto header = detail::split_tabs(line);
  if (header.size() < 4 || header[0] != "chrom" || header[1] != "start" || header[2] != "end")
    throw parse_error(where, lineno, "header must be 'chrom<TAB>start<TAB>end<TAB><tracks...>'");
  PosteriorTable t;
  for (std::size_t k = 3; k < header.size(); ++k)
    t.names.emplace_back(header[k]);
  t.tracks.resize(t.names.size());
  while (detail::getline_stripped(in, line)) {
    ++lineno;
    if (line.empty())
      continue;
    const auto f = detail::split_tabs(line);
    if (f.size() != t.names.size() + 3)
      throw parse_error(where, lineno, "ragged row");
    Bin b{std::string(f[0]), 0, 0, 0};
    if (!detail::parse_uint(f[1], b.start) || !detail::parse_uint(f[2], b.end) ||
        b.end <= b.start)
      throw parse_error(where, lineno, "invalid bin coordinates");
    if (!t.bins.empty() && t.bins.back().chrom == b.chrom && b.start < t.bins.back().end)
      throw parse_error(where, lineno, "bins are unsorted or overlapping");
    for (std::size_t k = 0; k < t.names.size(); ++k) {
      double v;
      const auto s = f[k + 3];
      const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !(v >= 0.0 && v <= 1.0))
        throw parse_error(where, lineno, "posterior '" + std::string(s) + "' is not in [0,1]");
      t.tracks[k].push_back(v);
    }
    t.bins.push_back(std::move(b));
  }
  resegment(t.bins);
  return t;
}

/// BED6: name is `<prefix><index>`, score round(1000 * mean posterior).
inline void write_bed(std::ostream &os, std::span<const RegionCall> regions,
                      const std::string &prefix = "region") {
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const auto &r = regions[i];
    os << r.chrom << '\t' << r.start << '\t' << r.end << '\t' << prefix << (i + 1) << '\t'
       << bed_score(r) << "\t.\n";
  }
}

inline void write_bedgraph(std::ostream &os, std::span<const Bin> bins,
                           std::span<const double> values, const std::string &track_name) {
  if (bins.size() != values.size())
    throw dimension_error("bedGraph values and bins differ in length");
  os << "track type=bedGraph name=\"" << track_name << "\"\n";
  for (std::size_t m = 0; m < bins.size(); ++m)
    os << bins[m].chrom << '\t' << bins[m].start << '\t' << bins[m].end << '\t'
       << format_double(values[m]) << '\n';
}

/// Retained sampler draws: `iteration` then one column per parameter.
inline void write_trace(std::ostream &os, const Trace &t) {
  os << "iteration";
  for (const auto &c : t.columns)
    os << '\t' << c;
  os << '\n';
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    os << t.iterations[i];
    for (double v : t.rows[i])
      os << '\t' << format_double(v);
    os << '\n';
  }
}

inline void write_bic_table(std::ostream &os, std::span<const BicRow> rows) {
  os << "experiment\tbins\tloglik_nb_nb\tloglik_zinb_nb\tbic_nb_nb\tbic_zinb_nb\tpreferred\n";
  for (const auto &r : rows)
    os << r.experiment << '\t' << r.bins << '\t' << format_double(r.loglik_nb) << '\t'
       << format_double(r.loglik_zinb) << '\t' << format_double(r.bic_nb) << '\t'
       << format_double(r.bic_zinb) << '\t' << (r.bic_zinb < r.bic_nb ? "zinb-nb" : "nb-nb")
       << '\n';
}

} // namespace chipmrf

#endif
