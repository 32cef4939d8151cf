#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace pdc {

struct PairedSample {
  std::vector<double> condition_a;
  std::vector<double> condition_b;
};

struct SignedRankResult {
  double statistic_w = 0.0;  // min(T+, T-)
  std::size_t n_effective = 0;
  double p_raw = 1.0;
  bool exact = false;
};

enum class Direction { a_greater, b_greater, none };

struct PairedTestResult {
  bool testable = true;  // false when every difference was zero
  double statistic_w = 0.0;
  std::size_t n_effective = 0;
  double p_raw = 1.0;
  double p_adjusted = 1.0;
  bool significant = false;
  Direction direction = Direction::none;
};

struct HolmResult {
  double p_adjusted;
  bool reject;
};

inline constexpr int kDefaultExactThreshold = 25;

// Mid-ranks (1-based) of the given values.
std::vector<double> mid_ranks(const std::vector<double>& values);

/// Two-sided Wilcoxon signed-rank test on the paired differences a - b.
/// Zero differences are discarded. With at most `exact_threshold` remaining
/// pairs and no tied magnitudes the p-value is exact over all 2^n sign
/// assignments; otherwise a continuity-corrected normal approximation with
/// tie-corrected variance is used.
SignedRankResult wilcoxon_signed_rank(const PairedSample& sample, int exact_threshold = kDefaultExactThreshold);

// Exact null CDF P(T+ <= w) for n untied ranks 1..n.
double signed_rank_exact_cdf(std::size_t n, double w);

std::vector<HolmResult> holm_bonferroni(const std::vector<double>& p_values, double alpha);

// Hypothesis key: ordered channel pair plus band name.
struct HypothesisKey {
  std::string source;
  std::string target;
  std::string band;
  auto operator<=>(const HypothesisKey&) const = default;
  std::string pair_label() const { return source + "->" + target; }
};

using ConditionValues = std::map<HypothesisKey, std::vector<double>>;

Direction median_direction(const PairedSample& sample);

std::map<HypothesisKey, PairedTestResult> compare_conditions(const ConditionValues& a, const ConditionValues& b,
                                                             double alpha,
                                                             int exact_threshold = kDefaultExactThreshold);

std::string to_string(Direction direction);

// Test table: pair,direction,band,n,W,p_raw,p_adjusted,significant
void write_test_table_csv(std::ostream& out, const std::map<HypothesisKey, PairedTestResult>& results);
void write_test_table_csv(const std::filesystem::path& path, const std::map<HypothesisKey, PairedTestResult>& results);

// Band-value table in long form: source,target,band,subject,value.
using BandValueTable = std::map<HypothesisKey, std::map<std::string, double>>;

BandValueTable read_band_values_csv(const std::filesystem::path& path);
void write_band_values_csv(std::ostream& out, const BandValueTable& table);
void write_band_values_csv(const std::filesystem::path& path, const BandValueTable& table);

// Index-aligns two tables by subject id. Key sets and per-key subject sets must match.
std::pair<ConditionValues, ConditionValues> align_by_subject(const BandValueTable& a, const BandValueTable& b);

}  // namespace pdc
