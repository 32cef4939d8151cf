#include "pdc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "csv_util.hpp"
#include "pdc/error.hpp"

namespace pdc {

std::vector<double> mid_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return values[l] < values[r]; });
  std::vector<double> ranks(values.size());
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start + 1;
    while (end < order.size() && values[order[end]] == values[order[start]]) ++end;
    const double rank = 0.5 * static_cast<double>(start + 1 + end);  // mean of start+1 .. end
    for (std::size_t k = start; k < end; ++k) ranks[order[k]] = rank;
    start = end;
  }
  return ranks;
}

double signed_rank_exact_cdf(std::size_t n, double w) {
  if (w < 0.0) return 0.0;
  const std::size_t total = n * (n + 1) / 2;
  // counts[s] = number of sign assignments whose positive-rank sum is s
  std::vector<double> counts(total + 1, 0.0);
  counts[0] = 1.0;
  for (std::size_t rank = 1; rank <= n; ++rank) {
    for (std::size_t s = rank * (rank + 1) / 2; s >= rank; --s) counts[s] += counts[s - rank];
  }
  const auto limit = static_cast<std::size_t>(std::min(std::floor(w), static_cast<double>(total)));
  double below = 0.0;
  for (std::size_t s = 0; s <= limit; ++s) below += counts[s];
  return std::ldexp(below, -static_cast<int>(n));
}

SignedRankResult wilcoxon_signed_rank(const PairedSample& sample, int exact_threshold) {
  if (sample.condition_a.size() != sample.condition_b.size()) {
    fail(ErrorKind::argument, "paired sample conditions differ in length");
  }
  if (sample.condition_a.empty()) fail(ErrorKind::argument, "paired sample is empty");
  std::vector<double> magnitudes;
  std::vector<bool> positive;
  for (std::size_t k = 0; k < sample.condition_a.size(); ++k) {
    const double d = sample.condition_a[k] - sample.condition_b[k];
    if (!std::isfinite(d)) fail(ErrorKind::argument, "paired sample contains non-finite values");
    if (d == 0.0) continue;
    magnitudes.push_back(std::abs(d));
    positive.push_back(d > 0.0);
  }
  const std::size_t n = magnitudes.size();
  if (n == 0) fail(ErrorKind::degenerate_sample, "all paired differences are zero");

  const auto ranks = mid_ranks(magnitudes);
  double t_plus = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (positive[k]) t_plus += ranks[k];
  }
  const double nd = static_cast<double>(n);
  const double total = nd * (nd + 1.0) / 2.0;
  const double t_minus = total - t_plus;

  // Tie groups: sum of (t^3 - t) over groups of equal magnitude.
  auto sorted = magnitudes;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start + 1;
    while (end < n && sorted[end] == sorted[start]) ++end;
    const double t = static_cast<double>(end - start);
    tie_term += t * t * t - t;
    start = end;
  }

  SignedRankResult result;
  result.statistic_w = std::min(t_plus, t_minus);
  result.n_effective = n;
  if (exact_threshold > 0 && n <= static_cast<std::size_t>(exact_threshold) && tie_term == 0.0) {
    result.exact = true;
    result.p_raw = std::min(1.0, 2.0 * signed_rank_exact_cdf(n, result.statistic_w));
    return result;
  }
  const double mean = total / 2.0;
  const double variance = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
  if (!(variance > 0.0)) {
    result.p_raw = 1.0;
    return result;
  }
  const double z = std::max(0.0, std::abs(t_plus - mean) - 0.5) / std::sqrt(variance);
  result.p_raw = std::clamp(std::erfc(z / std::sqrt(2.0)), 0.0, 1.0);
  return result;
}

std::vector<HolmResult> holm_bonferroni(const std::vector<double>& p_values, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorKind::argument, "alpha must lie in (0, 1)");
  for (const double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::argument, "p-value " + detail::format_double(p) + " outside [0, 1]");
  }
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return p_values[l] < p_values[r]; });

  std::vector<HolmResult> out(m);
  double running = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double scaled = std::min(1.0, static_cast<double>(m - k) * p_values[order[k]]);
    running = std::max(running, scaled);
    out[order[k]] = {running, running <= alpha};
  }
  return out;
}

Direction median_direction(const PairedSample& sample) {
  std::vector<double> d(sample.condition_a.size());
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = sample.condition_a[k] - sample.condition_b[k];
  if (d.empty()) return Direction::none;
  std::sort(d.begin(), d.end());
  const std::size_t mid = d.size() / 2;
  const double median = d.size() % 2 ? d[mid] : 0.5 * (d[mid - 1] + d[mid]);
  if (median > 0.0) return Direction::a_greater;
  if (median < 0.0) return Direction::b_greater;
  return Direction::none;
}

std::map<HypothesisKey, PairedTestResult> compare_conditions(const ConditionValues& a, const ConditionValues& b,
                                                             double alpha, int exact_threshold) {
  if (a.size() != b.size() || !std::equal(a.begin(), a.end(), b.begin(), [](const auto& l, const auto& r) {
        return l.first == r.first;
      })) {
    fail(ErrorKind::argument, "condition tables must cover the same (pair, band) keys");
  }
  std::map<HypothesisKey, PairedTestResult> results;
  std::vector<double> p_raw;
  p_raw.reserve(a.size());
  for (const auto& [key, values_a] : a) {
    const auto& values_b = b.at(key);
    if (values_a.size() != values_b.size()) {
      fail(ErrorKind::argument, "key " + key.pair_label() + "/" + key.band + " has " + std::to_string(values_a.size()) +
                                    " values in condition A but " + std::to_string(values_b.size()) + " in B");
    }
    const PairedSample sample{values_a, values_b};
    PairedTestResult r;
    try {
      const auto test = wilcoxon_signed_rank(sample, exact_threshold);
      r.statistic_w = test.statistic_w;
      r.n_effective = test.n_effective;
      r.p_raw = test.p_raw;
      r.direction = median_direction(sample);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::degenerate_sample) throw;
      r.testable = false;
    }
    p_raw.push_back(r.p_raw);
    results.emplace(key, r);
  }
  const auto holm = holm_bonferroni(p_raw, alpha);
  std::size_t k = 0;
  for (auto& [key, r] : results) {
    r.p_adjusted = holm[k].p_adjusted;
    r.significant = r.testable && holm[k].reject;
    ++k;
  }
  return results;
}

std::string to_string(Direction direction) {
  switch (direction) {
    case Direction::a_greater: return "a_greater";
    case Direction::b_greater: return "b_greater";
    case Direction::none: return "none";
  }
  return "none";
}

void write_test_table_csv(std::ostream& out, const std::map<HypothesisKey, PairedTestResult>& results) {
  out << "pair,direction,band,n,W,p_raw,p_adjusted,significant\n";
  for (const auto& [key, r] : results) {
    out << key.pair_label() << ',' << (r.testable ? to_string(r.direction) : "untestable") << ',' << key.band << ','
        << r.n_effective << ',' << detail::format_double(r.statistic_w) << ',' << detail::format_double(r.p_raw) << ','
        << detail::format_double(r.p_adjusted) << ',' << (r.significant ? "true" : "false") << '\n';
  }
}

void write_test_table_csv(const std::filesystem::path& path, const std::map<HypothesisKey, PairedTestResult>& results) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write test table '" + path.string() + "'");
  write_test_table_csv(out, results);
  if (!out) fail(ErrorKind::io, "failed writing '" + path.string() + "'");
}

BandValueTable read_band_values_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open band-value table '" + path.string() + "'");
  BandValueTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_fields(line);
    if (line_no == 1) {
      if (f.size() != 5 || f[0] != "source" || f[1] != "target" || f[2] != "band" || f[3] != "subject" ||
          f[4] != "value") {
        fail(ErrorKind::schema, path.string() + ": expected header 'source,target,band,subject,value'");
      }
      continue;
    }
    const auto value = f.size() == 5 ? detail::parse_double(f[4]) : std::nullopt;
    if (!value || !std::isfinite(*value)) {
      fail(ErrorKind::schema, path.string() + ":" + std::to_string(line_no) + ": malformed row");
    }
    auto& per_subject = table[{std::string(f[0]), std::string(f[1]), std::string(f[2])}];
    if (!per_subject.emplace(std::string(f[3]), *value).second) {
      fail(ErrorKind::schema, path.string() + ":" + std::to_string(line_no) + ": duplicate subject for key");
    }
  }
  if (table.empty()) fail(ErrorKind::schema, path.string() + ": table has no rows");
  return table;
}

void write_band_values_csv(std::ostream& out, const BandValueTable& table) {
  out << "source,target,band,subject,value\n";
  for (const auto& [key, per_subject] : table) {
    for (const auto& [subject, value] : per_subject) {
      out << key.source << ',' << key.target << ',' << key.band << ',' << subject << ','
          << detail::format_double(value) << '\n';
    }
  }
}

void write_band_values_csv(const std::filesystem::path& path, const BandValueTable& table) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write band-value table '" + path.string() + "'");
  write_band_values_csv(out, table);
  if (!out) fail(ErrorKind::io, "failed writing '" + path.string() + "'");
}

std::pair<ConditionValues, ConditionValues> align_by_subject(const BandValueTable& a, const BandValueTable& b) {
  ConditionValues out_a, out_b;
  if (a.size() != b.size()) fail(ErrorKind::schema, "band-value tables cover different (pair, band) keys");
  for (const auto& [key, subjects_a] : a) {
    const auto it = b.find(key);
    if (it == b.end()) fail(ErrorKind::schema, "key " + key.pair_label() + "/" + key.band + " missing from condition B");
    auto& va = out_a[key];
    auto& vb = out_b[key];
    for (const auto& [subject, value] : subjects_a) {
      const auto match = it->second.find(subject);
      if (match == it->second.end()) {
        fail(ErrorKind::schema, "subject '" + subject + "' missing from condition B for key " + key.pair_label() +
                                    "/" + key.band);
      }
      va.push_back(value);
      vb.push_back(match->second);
    }
    if (it->second.size() != subjects_a.size()) {
      fail(ErrorKind::schema, "condition B has extra subjects for key " + key.pair_label() + "/" + key.band);
    }
  }
  return {std::move(out_a), std::move(out_b)};
}

}  // namespace pdc
