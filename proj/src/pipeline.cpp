#include "pdc/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "csv_util.hpp"
#include "pdc/error.hpp"
#include "pdc/parallel.hpp"
#include "pdc/var_model.hpp"

namespace pdc {

std::string to_string(OrderMode mode) { return mode == OrderMode::fixed ? "fixed" : "auto_aic"; }
std::string to_string(ModelLayout layout) { return layout == ModelLayout::bivariate ? "bivariate" : "joint"; }

namespace {

std::string pair_label(const ChannelPair& p) { return p.source + "->" + p.target; }

template <typename T>
T field_or(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) && !j[key].is_null() ? j[key].get<T>() : fallback;
}

}  // namespace

nlohmann::json config_to_json(const PipelineConfig& c) {
  nlohmann::json j;
  j["sampling_rate_hz"] = c.sampling_rate_hz;
  j["epoch_length_ms"] = c.epoch_length_ms;
  auto pairs = nlohmann::json::array();
  for (const auto& p : c.channel_pairs) pairs.push_back({p.source, p.target});
  j["channel_pairs"] = std::move(pairs);
  auto bands = nlohmann::json::array();
  for (const auto& [name, e] : c.bands) bands.push_back({{"name", name}, {"low_hz", e.low_hz}, {"high_hz", e.high_hz}});
  j["bands"] = std::move(bands);
  j["freq_grid"] = {{"low_hz", c.freq_grid.low_hz}, {"high_hz", c.freq_grid.high_hz}, {"step_hz", c.freq_grid.step_hz}};
  j["order"] = {{"mode", to_string(c.order_mode)}, {"fixed_order", c.fixed_order}, {"scan_max", c.aic_scan_max}};
  j["stationarity"] = {{"n_windows", c.stationarity.n_windows},
                       {"mean_tolerance", c.stationarity.mean_tolerance},
                       {"variance_tolerance", c.stationarity.variance_tolerance}};
  j["alpha"] = c.alpha;
  j["amplitude_reject_threshold"] =
      c.amplitude_reject_threshold ? nlohmann::json(*c.amplitude_reject_threshold) : nlohmann::json(nullptr);
  j["model_layout"] = to_string(c.model_layout);
  j["center_segments"] = c.center_segments;
  j["exact_threshold"] = c.exact_threshold;
  return j;
}

PipelineConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorKind::schema, "pipeline config must be a JSON object");
  PipelineConfig c;
  try {
    c.sampling_rate_hz = field_or(j, "sampling_rate_hz", c.sampling_rate_hz);
    c.epoch_length_ms = field_or(j, "epoch_length_ms", c.epoch_length_ms);
    if (j.contains("channel_pairs")) {
      for (const auto& p : j.at("channel_pairs")) {
        if (p.is_array() && p.size() == 2) {
          c.channel_pairs.push_back({p[0].get<std::string>(), p[1].get<std::string>()});
        } else if (p.is_object()) {
          c.channel_pairs.push_back({p.at("source").get<std::string>(), p.at("target").get<std::string>()});
        } else {
          fail(ErrorKind::schema, "channel_pairs entries must be [source, target]");
        }
      }
    }
    if (j.contains("bands")) {
      c.bands.clear();
      for (const auto& b : j.at("bands")) {
        c.bands.push_back({b.at("name").get<std::string>(), {b.at("low_hz").get<double>(), b.at("high_hz").get<double>()}});
      }
    }
    if (j.contains("freq_grid")) {
      const auto& g = j["freq_grid"];
      c.freq_grid = {field_or(g, "low_hz", c.freq_grid.low_hz), field_or(g, "high_hz", c.freq_grid.high_hz),
                     field_or(g, "step_hz", c.freq_grid.step_hz)};
    }
    if (j.contains("order")) {
      const auto& o = j["order"];
      const auto mode = field_or<std::string>(o, "mode", "fixed");
      if (mode == "fixed") {
        c.order_mode = OrderMode::fixed;
      } else if (mode == "auto_aic") {
        c.order_mode = OrderMode::auto_aic;
      } else {
        fail(ErrorKind::schema, "order.mode must be 'fixed' or 'auto_aic'");
      }
      c.fixed_order = field_or(o, "fixed_order", c.fixed_order);
      c.aic_scan_max = field_or(o, "scan_max", c.aic_scan_max);
    }
    if (j.contains("stationarity")) {
      const auto& s = j["stationarity"];
      c.stationarity.n_windows = field_or(s, "n_windows", c.stationarity.n_windows);
      c.stationarity.mean_tolerance = field_or(s, "mean_tolerance", c.stationarity.mean_tolerance);
      c.stationarity.variance_tolerance = field_or(s, "variance_tolerance", c.stationarity.variance_tolerance);
    }
    c.alpha = field_or(j, "alpha", c.alpha);
    if (j.contains("amplitude_reject_threshold") && !j["amplitude_reject_threshold"].is_null()) {
      c.amplitude_reject_threshold = j["amplitude_reject_threshold"].get<double>();
    }
    const auto layout = field_or<std::string>(j, "model_layout", "bivariate");
    if (layout == "bivariate") {
      c.model_layout = ModelLayout::bivariate;
    } else if (layout == "joint") {
      c.model_layout = ModelLayout::joint;
    } else {
      fail(ErrorKind::schema, "model_layout must be 'bivariate' or 'joint'");
    }
    c.center_segments = field_or(j, "center_segments", c.center_segments);
    c.exact_threshold = field_or(j, "exact_threshold", c.exact_threshold);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::schema, std::string("invalid pipeline config: ") + e.what());
  }
  if (!(c.sampling_rate_hz > 0.0)) fail(ErrorKind::schema, "sampling_rate_hz must be positive");
  if (!(c.epoch_length_ms > 0.0)) fail(ErrorKind::schema, "epoch_length_ms must be positive");
  if (c.fixed_order < 1 || c.aic_scan_max < 1) fail(ErrorKind::schema, "model orders must be at least 1");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) fail(ErrorKind::schema, "alpha must lie in (0, 1)");
  if (c.bands.empty()) fail(ErrorKind::schema, "at least one band is required");
  return c;
}

std::vector<ChannelPair> resolve_pairs(const PipelineConfig& config, const std::vector<std::string>& labels) {
  std::vector<ChannelPair> pairs = config.channel_pairs;
  if (pairs.empty()) {
    for (const auto& s : labels) {
      for (const auto& t : labels) {
        if (s != t) pairs.push_back({s, t});
      }
    }
  }
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& p : pairs) {
    for (const auto& label : {p.source, p.target}) {
      if (std::find(labels.begin(), labels.end(), label) == labels.end()) {
        fail(ErrorKind::argument, "channel '" + label + "' named in channel_pairs is not in the recording");
      }
    }
    if (p.source == p.target) fail(ErrorKind::argument, "channel pair " + pair_label(p) + " needs two distinct channels");
    if (!seen.emplace(p.source, p.target).second) fail(ErrorKind::argument, "duplicate channel pair " + pair_label(p));
  }
  if (pairs.empty()) fail(ErrorKind::argument, "no channel pairs to analyze");
  return pairs;
}

namespace {

// A fitted model covers a set of recording channels; each hypothesis pair reads one entry of it.
struct ModelPlan {
  std::vector<std::size_t> channels;  // recording column indices, ascending
  std::vector<std::size_t> pair_indices;
};

std::vector<ModelPlan> plan_models(ModelLayout layout, const std::vector<ChannelPair>& pairs,
                                   const std::vector<std::string>& labels) {
  const auto index_of = [&](const std::string& label) {
    return static_cast<std::size_t>(std::find(labels.begin(), labels.end(), label) - labels.begin());
  };
  std::vector<ModelPlan> plans;
  if (layout == ModelLayout::joint) {
    ModelPlan plan;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      plan.channels.push_back(index_of(pairs[k].source));
      plan.channels.push_back(index_of(pairs[k].target));
      plan.pair_indices.push_back(k);
    }
    std::sort(plan.channels.begin(), plan.channels.end());
    plan.channels.erase(std::unique(plan.channels.begin(), plan.channels.end()), plan.channels.end());
    plans.push_back(std::move(plan));
    return plans;
  }
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    std::vector<std::size_t> channels{index_of(pairs[k].source), index_of(pairs[k].target)};
    std::sort(channels.begin(), channels.end());
    auto it = std::find_if(plans.begin(), plans.end(), [&](const ModelPlan& p) { return p.channels == channels; });
    if (it == plans.end()) {
      plans.push_back({channels, {}});
      it = std::prev(plans.end());
    }
    it->pair_indices.push_back(k);
  }
  return plans;
}

std::size_t position_in(const std::vector<std::size_t>& channels, std::size_t channel) {
  return static_cast<std::size_t>(std::find(channels.begin(), channels.end(), channel) - channels.begin());
}

std::string attrition_summary(const Attrition& a) {
  std::ostringstream s;
  s << "segments_in=" << a.segments_in << " amplitude_rejected=" << a.amplitude_rejected
    << " screened_out=" << a.screened_out << " failed_fit=" << a.failed_fit << " used=" << a.used;
  return s.str();
}

}  // namespace

SubjectResult analyze_subject(const PipelineConfig& config, const std::vector<ChannelPair>& pairs,
                              const SubjectInput& subject) {
  const auto where = "subject '" + subject.id + "' (" + subject.provenance + ")";
  SubjectResult result;
  result.id = subject.id;
  result.provenance = subject.provenance;

  const auto& labels = subject.recording.channel_labels();
  const auto plans = plan_models(config.model_layout, pairs, labels);

  std::vector<Segment> segments;
  try {
    segments = extract_segments(subject.recording, config.epoch_length_ms, subject.epoch_starts_ms);
  } catch (const Error& e) {
    throw Error(e.kind(), where + ": " + e.what());
  }
  const auto grid = FrequencyGrid::uniform(config.freq_grid.low_hz, config.freq_grid.high_hz, config.freq_grid.step_hz,
                                           subject.recording.sampling_rate_hz());

  // Each model is screened and fitted on its own channels only, so a channel that
  // one model does not use never removes data from it.
  for (const auto& plan : plans) {
    std::string model_name;
    for (const auto c : plan.channels) model_name += (model_name.empty() ? "" : "+") + labels[c];
    Attrition attrition;
    std::vector<PdcSpectrum> spectra;
    std::string last_fit_error;
    attrition.segments_in = segments.size();
    for (const auto& full : segments) {
      const Segment segment = full.select_channels(plan.channels);
      if (config.amplitude_reject_threshold && segment.max_abs_amplitude() > *config.amplitude_reject_threshold) {
        ++attrition.amplitude_rejected;
        ++attrition.screened_out;
        continue;
      }
      try {
        if (!screen_stationarity(segment, config.stationarity).passed) {
          ++attrition.screened_out;
          continue;
        }
      } catch (const Error& e) {
        throw Error(e.kind(), where + ", epoch at sample " + std::to_string(full.source_offset()) + ": " + e.what());
      }
      const Segment prepared = config.center_segments ? segment.centered() : segment;
      try {
        int order = config.fixed_order;
        if (config.order_mode == OrderMode::auto_aic) {
          const int bound = max_order_bound(prepared.n_samples(), prepared.n_channels());
          order = select_order(prepared, {std::min(config.aic_scan_max, bound), false, 1}).chosen_order;
        }
        const auto fit = fit_var(prepared, order);
        auto spectrum = compute_pdc(fit.model, grid);
        if (!check_stability(fit.model)) ++result.unstable_models;
        ++result.chosen_orders[order];
        result.degenerate_columns += spectrum.degenerate_columns.size();
        spectra.push_back(std::move(spectrum));
        ++attrition.used;
      } catch (const Error& e) {
        ++attrition.failed_fit;
        last_fit_error = "epoch at sample " + std::to_string(full.source_offset()) + ": " + e.what();
      }
    }
    result.model_attrition[model_name] = attrition;
    result.attrition += attrition;

    if (attrition.used == 0) {
      fail(ErrorKind::pipeline, where + ": no segment survived for model " + model_name + " (" +
                                    attrition_summary(attrition) + ")" +
                                    (last_fit_error.empty() ? "" : "; last fit error: " + last_fit_error));
    }

    const auto bands = band_average(average_over_segments(spectra), config.bands);
    const auto local = [&](const std::string& label) {
      const auto index = static_cast<std::size_t>(std::find(labels.begin(), labels.end(), label) - labels.begin());
      return static_cast<Eigen::Index>(position_in(plan.channels, index));
    };
    for (const auto k : plan.pair_indices) {
      for (const auto& [band, matrix] : bands.bands) {
        result.band_values[band][pair_label(pairs[k])] = matrix(local(pairs[k].target), local(pairs[k].source));
      }
    }
  }
  return result;
}

ConditionValues condition_values(const ConditionReport& report, const std::vector<ChannelPair>& pairs,
                                 const BandMap& bands) {
  ConditionValues values;
  for (const auto& p : pairs) {
    for (const auto& [band, edges] : bands) {
      auto& list = values[{p.source, p.target, band}];
      for (const auto& s : report.subjects) list.push_back(s.band_values.at(band).at(pair_label(p)));
    }
  }
  return values;
}

BandValueTable band_value_table(const ConditionReport& report) {
  BandValueTable table;
  for (const auto& s : report.subjects) {
    for (const auto& [band, per_pair] : s.band_values) {
      for (const auto& [label, value] : per_pair) {
        const auto arrow = label.find("->");
        table[{label.substr(0, arrow), label.substr(arrow + 2), band}][s.id] = value;
      }
    }
  }
  return table;
}

AnalysisReport run_pipeline(const PipelineConfig& config, const std::vector<SubjectInput>& condition_a,
                            const std::vector<SubjectInput>& condition_b, std::size_t threads) {
  if (condition_a.empty() || condition_b.empty()) {
    fail(ErrorKind::argument, "each condition needs at least one subject recording");
  }
  if (condition_a.size() != condition_b.size()) {
    fail(ErrorKind::argument, "paired comparison needs the same number of subjects per condition (" +
                                  std::to_string(condition_a.size()) + " vs " + std::to_string(condition_b.size()) + ")");
  }
  AnalysisReport report;
  report.config = config;
  report.pairs = resolve_pairs(config, condition_a.front().recording.channel_labels());

  const std::size_t n = condition_a.size();
  std::vector<SubjectResult> results(2 * n);
  parallel_for(2 * n, threads, [&](std::size_t k) {
    const auto& subject = k < n ? condition_a[k] : condition_b[k - n];
    resolve_pairs(config, subject.recording.channel_labels());  // validates labels
    results[k] = analyze_subject(config, report.pairs, subject);
  });

  auto total = [](ConditionReport& c) {
    for (const auto& s : c.subjects) c.attrition += s.attrition;
  };
  report.condition_a.subjects.assign(results.begin(), results.begin() + static_cast<std::ptrdiff_t>(n));
  report.condition_b.subjects.assign(results.begin() + static_cast<std::ptrdiff_t>(n), results.end());
  total(report.condition_a);
  total(report.condition_b);

  report.tests = compare_conditions(condition_values(report.condition_a, report.pairs, config.bands),
                                    condition_values(report.condition_b, report.pairs, config.bands), config.alpha,
                                    config.exact_threshold);

  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  std::ostringstream stamp;
  stamp << std::put_time(&utc, "%Y-%m-%dT%H:%M:%SZ");
  report.generated_at = stamp.str();
  return report;
}

namespace {

nlohmann::json attrition_json(const Attrition& a) {
  return {{"segments_in", a.segments_in},
          {"amplitude_rejected", a.amplitude_rejected},
          {"screened_out", a.screened_out},
          {"failed_fit", a.failed_fit},
          {"used", a.used}};
}

nlohmann::json condition_json(const ConditionReport& c, const std::vector<ChannelPair>& pairs, const BandMap& bands) {
  nlohmann::json j;
  j["attrition"] = attrition_json(c.attrition);
  auto subjects = nlohmann::json::array();
  for (const auto& s : c.subjects) {
    nlohmann::json orders = nlohmann::json::object();
    for (const auto& [order, count] : s.chosen_orders) orders[std::to_string(order)] = count;
    nlohmann::json per_model = nlohmann::json::object();
    for (const auto& [model, a] : s.model_attrition) per_model[model] = attrition_json(a);
    subjects.push_back({{"id", s.id},
                        {"source", s.provenance},
                        {"attrition", attrition_json(s.attrition)},
                        {"model_attrition", std::move(per_model)},
                        {"unstable_models", s.unstable_models},
                        {"degenerate_columns", s.degenerate_columns},
                        {"chosen_orders", std::move(orders)},
                        {"band_values", s.band_values}});
  }
  j["subjects"] = std::move(subjects);

  // Cohort mean per band as a target x source matrix over the channels named in the pairs.
  std::vector<std::string> channels;
  for (const auto& p : pairs) {
    for (const auto& label : {p.source, p.target}) {
      if (std::find(channels.begin(), channels.end(), label) == channels.end()) channels.push_back(label);
    }
  }
  nlohmann::json matrices = nlohmann::json::object();
  for (const auto& [band, edges] : bands) {
    auto rows = nlohmann::json::array();
    for (const auto& target : channels) {
      auto row = nlohmann::json::array();
      for (const auto& source : channels) {
        const auto label = source + "->" + target;
        if (std::none_of(pairs.begin(), pairs.end(), [&](const ChannelPair& p) { return pair_label(p) == label; })) {
          row.push_back(nullptr);
          continue;
        }
        double sum = 0.0;
        for (const auto& s : c.subjects) sum += s.band_values.at(band).at(label);
        row.push_back(sum / static_cast<double>(c.subjects.size()));
      }
      rows.push_back(std::move(row));
    }
    matrices[band] = std::move(rows);
  }
  j["band_matrices"] = {{"channel_labels", channels}, {"bands", std::move(matrices)}};
  return j;
}

void write_atomically(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) fail(ErrorKind::io, "failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::io, "cannot move '" + tmp.string() + "' into place: " + ec.message());
}

}  // namespace

nlohmann::json report_to_json(const AnalysisReport& r) {
  nlohmann::json j;
  j["toolkit_version"] = r.toolkit_version;
  j["generated_at"] = r.generated_at;
  j["config"] = config_to_json(r.config);
  auto pairs = nlohmann::json::array();
  for (const auto& p : r.pairs) pairs.push_back({p.source, p.target});
  j["pairs"] = std::move(pairs);
  j["conditions"] = {{"a", condition_json(r.condition_a, r.pairs, r.config.bands)},
                     {"b", condition_json(r.condition_b, r.pairs, r.config.bands)}};
  auto tests = nlohmann::json::array();
  std::size_t significant = 0;
  for (const auto& [key, t] : r.tests) {
    significant += t.significant ? 1 : 0;
    tests.push_back({{"pair", key.pair_label()},
                     {"source", key.source},
                     {"target", key.target},
                     {"band", key.band},
                     {"testable", t.testable},
                     {"direction", t.testable ? to_string(t.direction) : "untestable"},
                     {"n", t.n_effective},
                     {"W", t.statistic_w},
                     {"p_raw", t.p_raw},
                     {"p_adjusted", t.p_adjusted},
                     {"significant", t.significant}});
  }
  j["tests"] = std::move(tests);
  j["family_size"] = r.tests.size();
  j["significant_count"] = significant;
  return j;
}

void write_report(const std::filesystem::path& dir, const AnalysisReport& report) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::io, "cannot create output directory '" + dir.string() + "': " + ec.message());

  std::ostringstream tests, values_a, values_b;
  write_test_table_csv(tests, report.tests);
  write_band_values_csv(values_a, band_value_table(report.condition_a));
  write_band_values_csv(values_b, band_value_table(report.condition_b));

  write_atomically(dir / "tests.csv", tests.str());
  write_atomically(dir / "band_values_a.csv", values_a.str());
  write_atomically(dir / "band_values_b.csv", values_b.str());
  write_atomically(dir / "report.json", report_to_json(report).dump(2) + "\n");
}

}  // namespace pdc
