#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pdc/signal.hpp"
#include "pdc/spectral.hpp"
#include "pdc/stats.hpp"

namespace pdc {

inline constexpr const char* kToolkitVersion = "0.1.0";

enum class OrderMode { fixed, auto_aic };
enum class ModelLayout { bivariate, joint };

struct ChannelPair {
  std::string source;
  std::string target;
  bool operator==(const ChannelPair&) const = default;
};

struct GridConfig {
  double low_hz = 4.0;
  double high_hz = 30.0;
  double step_hz = 0.5;
};

struct PipelineConfig {
  double sampling_rate_hz = 250.0;
  double epoch_length_ms = 900.0;
  std::vector<ChannelPair> channel_pairs;  // empty: every ordered pair of the recordings' channels
  BandMap bands = default_bands();
  GridConfig freq_grid;
  OrderMode order_mode = OrderMode::fixed;
  int fixed_order = 15;
  int aic_scan_max = 20;
  StationarityOptions stationarity;
  double alpha = 0.05;
  std::optional<double> amplitude_reject_threshold;
  ModelLayout model_layout = ModelLayout::bivariate;
  bool center_segments = true;
  int exact_threshold = kDefaultExactThreshold;
};

nlohmann::json config_to_json(const PipelineConfig& config);
PipelineConfig config_from_json(const nlohmann::json& j);

// One subject's recording in one condition. Subjects are paired across conditions by position.
struct SubjectInput {
  std::string id;
  Recording recording;
  std::vector<double> epoch_starts_ms;
  std::string provenance;  // file path or other origin, used in error messages
};

// Counts are in segment-model units: with several models per subject (bivariate
// layout) every segment is screened and fitted once per model.
struct Attrition {
  std::size_t segments_in = 0;
  std::size_t amplitude_rejected = 0;  // included in screened_out
  std::size_t screened_out = 0;
  std::size_t failed_fit = 0;
  std::size_t used = 0;

  Attrition& operator+=(const Attrition& o) {
    segments_in += o.segments_in;
    amplitude_rejected += o.amplitude_rejected;
    screened_out += o.screened_out;
    failed_fit += o.failed_fit;
    used += o.used;
    return *this;
  }
};

struct SubjectResult {
  std::string id;
  std::string provenance;
  Attrition attrition;                                // summed over models
  std::map<std::string, Attrition> model_attrition;  // keyed by the model's channels, e.g. "F3+T5"
  std::size_t unstable_models = 0;
  std::size_t degenerate_columns = 0;
  std::map<int, std::size_t> chosen_orders;  // order -> number of fitted models
  // band -> pair -> band-averaged PDC of the segment-averaged spectrum
  std::map<std::string, std::map<std::string, double>> band_values;
};

struct ConditionReport {
  std::vector<SubjectResult> subjects;
  Attrition attrition;
};

struct AnalysisReport {
  PipelineConfig config;
  std::vector<ChannelPair> pairs;  // resolved hypothesis pairs
  ConditionReport condition_a;
  ConditionReport condition_b;
  std::map<HypothesisKey, PairedTestResult> tests;
  std::string toolkit_version = kToolkitVersion;
  std::string generated_at;  // excluded from determinism checks
};

// Epoch extraction, amplitude rejection, stationarity screen, per-segment VAR fit and
// PDC, per-frequency averaging over segments, band averaging, then a paired comparison
// of the two conditions over the (pair, band) family.
AnalysisReport run_pipeline(const PipelineConfig& config, const std::vector<SubjectInput>& condition_a,
                            const std::vector<SubjectInput>& condition_b, std::size_t threads = 1);

// Per-subject processing for one condition (exposed for tests and the CLI).
SubjectResult analyze_subject(const PipelineConfig& config, const std::vector<ChannelPair>& pairs,
                              const SubjectInput& subject);

std::vector<ChannelPair> resolve_pairs(const PipelineConfig& config, const std::vector<std::string>& labels);

// Subject-by-key band values in the shape compare_conditions consumes.
ConditionValues condition_values(const ConditionReport& report, const std::vector<ChannelPair>& pairs,
                                 const BandMap& bands);
BandValueTable band_value_table(const ConditionReport& report);

nlohmann::json report_to_json(const AnalysisReport& report);

// Writes report.json, tests.csv, band_values_a.csv and band_values_b.csv into `dir`.
// Each file is written to a temporary name first and renamed into place.
void write_report(const std::filesystem::path& dir, const AnalysisReport& report);

std::string to_string(OrderMode mode);
std::string to_string(ModelLayout layout);

}  // namespace pdc
