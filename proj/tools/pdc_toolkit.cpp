// Command-line front end: simulate, fit, pdc, bands, compare, pipeline.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pdc/error.hpp"
#include "pdc/parallel.hpp"
#include "pdc/pipeline.hpp"
#include "pdc/signal.hpp"
#include "pdc/spectral.hpp"
#include "pdc/stats.hpp"
#include "pdc/synth.hpp"
#include "pdc/var_model.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) pdc::fail(pdc::ErrorKind::io, "cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    pdc::fail(pdc::ErrorKind::schema, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) pdc::fail(pdc::ErrorKind::io, "cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) pdc::fail(pdc::ErrorKind::io, "failed writing '" + path.string() + "'");
}

// Consecutive non-overlapping epochs from time zero.
std::vector<double> tiled_starts(const pdc::Recording& recording, double epoch_length_ms) {
  const auto n = pdc::epoch_sample_count(epoch_length_ms, recording.sampling_rate_hz());
  std::vector<double> starts;
  for (std::size_t row = 0; row + n <= recording.n_samples(); row += n) {
    starts.push_back(1000.0 * static_cast<double>(row) / recording.sampling_rate_hz());
  }
  return starts;
}

struct SimulateArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

struct FitArgs {
  std::string input;
  std::string out;
  double sampling_rate = 0.0;
  int order = 0;
  bool auto_order = false;
  int scan_max = 20;
  bool allow_exceeding_bound = false;
  bool no_center = false;
};

struct PdcArgs {
  std::string model;
  std::string input;
  std::string out;
  double sampling_rate = 0.0;
  int order = 15;
  double low = 4.0, high = 30.0, step = 0.5;
  bool no_center = false;
};

struct BandsArgs {
  std::string spectrum;
  std::string out;
  double sampling_rate = 0.0;
  std::vector<std::string> bands;
};

struct CompareArgs {
  std::string condition_a;
  std::string condition_b;
  std::string out;
  double alpha = 0.05;
  int exact_threshold = pdc::kDefaultExactThreshold;
};

struct PipelineArgs {
  std::string config;
  std::vector<std::string> condition_a;
  std::vector<std::string> condition_b;
  std::string markers;
  std::string out;
  std::optional<double> sampling_rate;
};

int run_simulate(const SimulateArgs& args) {
  auto spec = pdc::generator_spec_from_json(read_json_file(args.config));
  if (args.seed) spec.seed = *args.seed;
  pdc::write_recording_csv(args.out, pdc::generate(spec));
  return 0;
}

pdc::Segment whole_recording(const std::string& path, double sampling_rate, bool center) {
  const auto recording = pdc::read_recording_csv(path, sampling_rate);
  pdc::Segment segment(recording.samples(), recording.sampling_rate_hz(), recording.channel_labels());
  return center ? segment.centered() : segment;
}

int run_fit(const FitArgs& args) {
  const auto segment = whole_recording(args.input, args.sampling_rate, !args.no_center);
  json out;
  int order = args.order;
  if (args.auto_order) {
    const auto sel = pdc::select_order(segment, {args.scan_max, args.allow_exceeding_bound, 1});
    order = sel.chosen_order;
    json aic = json::array();
    for (const auto& [p, value] : sel.aic_values) aic.push_back({{"order", p}, {"aic", value}});
    out["order_selection"] = {{"aic_values", aic}, {"chosen_order", order}, {"rule", pdc::to_string(sel.rule)}};
  } else if (order < 1) {
    pdc::fail(pdc::ErrorKind::argument, "fit needs --order <p> or --auto");
  }
  const auto fit = pdc::fit_var(segment, order);
  json model = pdc::model_to_json(fit.model);
  model["sampling_rate_hz"] = args.sampling_rate;
  model["stable"] = pdc::check_stability(fit.model);
  if (out.contains("order_selection")) model["order_selection"] = out["order_selection"];
  write_json_file(args.out, model);
  return 0;
}

int run_pdc(const PdcArgs& args) {
  pdc::VarModel model;
  double fs = args.sampling_rate;
  if (!args.model.empty()) {
    const auto j = read_json_file(args.model);
    model = pdc::model_from_json(j);
    if (fs <= 0.0) fs = j.value("sampling_rate_hz", 0.0);
  } else {
    model = pdc::fit_var(whole_recording(args.input, fs, !args.no_center), args.order).model;
  }
  if (fs <= 0.0) pdc::fail(pdc::ErrorKind::argument, "a sampling rate is required (--sampling-rate)");
  const auto grid = pdc::FrequencyGrid::uniform(args.low, args.high, args.step, fs);
  const auto spectrum = pdc::compute_pdc(model, grid);
  pdc::write_spectrum_csv(args.out, spectrum);
  if (!spectrum.degenerate_columns.empty()) {
    std::cerr << "warning: " << spectrum.degenerate_columns.size() << " zero-norm PDC columns were set to 0\n";
  }
  return 0;
}

pdc::BandMap parse_bands(const std::vector<std::string>& specs) {
  if (specs.empty()) return pdc::default_bands();
  pdc::BandMap bands;
  for (const auto& s : specs) {
    const auto a = s.find(':');
    const auto b = s.find(':', a == std::string::npos ? a : a + 1);
    if (a == std::string::npos || b == std::string::npos) {
      pdc::fail(pdc::ErrorKind::argument, "band '" + s + "' must look like name:low:high");
    }
    try {
      bands.push_back({s.substr(0, a), {std::stod(s.substr(a + 1, b - a - 1)), std::stod(s.substr(b + 1))}});
    } catch (const std::exception&) {
      pdc::fail(pdc::ErrorKind::argument, "band '" + s + "' has non-numeric edges");
    }
  }
  return bands;
}

int run_bands(const BandsArgs& args) {
  const auto spectrum = pdc::read_spectrum_csv(args.spectrum, args.sampling_rate);
  write_json_file(args.out, pdc::bands_to_json(pdc::band_average(spectrum, parse_bands(args.bands))));
  return 0;
}

int run_compare(const CompareArgs& args) {
  const auto [a, b] =
      pdc::align_by_subject(pdc::read_band_values_csv(args.condition_a), pdc::read_band_values_csv(args.condition_b));
  pdc::write_test_table_csv(args.out, pdc::compare_conditions(a, b, args.alpha, args.exact_threshold));
  return 0;
}

struct InputEntry {
  std::string id;
  fs::path recording;
  std::optional<fs::path> markers;
};

std::vector<InputEntry> config_inputs(const json& j, const char* key, const fs::path& base) {
  std::vector<InputEntry> out;
  if (!j.contains("inputs") || !j["inputs"].contains(key)) return out;
  try {
    for (const auto& e : j["inputs"][key]) {
      InputEntry entry;
      entry.recording = base / e.at("recording").get<std::string>();
      if (e.contains("markers")) entry.markers = base / e["markers"].get<std::string>();
      entry.id = e.value("id", entry.recording.stem().string());
      out.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    pdc::fail(pdc::ErrorKind::schema, std::string("invalid inputs section: ") + e.what());
  }
  return out;
}

std::vector<pdc::SubjectInput> load_subjects(std::vector<InputEntry> entries, const pdc::PipelineConfig& config,
                                             const std::optional<fs::path>& shared_markers) {
  std::vector<pdc::SubjectInput> subjects;
  for (auto& e : entries) {
    if (!e.markers && shared_markers) e.markers = shared_markers;
    auto recording = pdc::read_recording_csv(e.recording, config.sampling_rate_hz);
    auto starts = e.markers ? pdc::read_markers_csv(*e.markers) : tiled_starts(recording, config.epoch_length_ms);
    subjects.push_back({e.id, std::move(recording), std::move(starts), e.recording.string()});
  }
  return subjects;
}

int run_pipeline_command(const PipelineArgs& args, std::size_t threads) {
  json config_json = json::object();
  fs::path base = fs::current_path();
  if (!args.config.empty()) {
    config_json = read_json_file(args.config);
    base = fs::absolute(args.config).parent_path();
  }
  auto config = pdc::config_from_json(config_json);
  if (args.sampling_rate) config.sampling_rate_hz = *args.sampling_rate;

  auto from_cli = [](const std::vector<std::string>& paths) {
    std::vector<InputEntry> out;
    for (const auto& p : paths) out.push_back({fs::path(p).stem().string(), p, std::nullopt});
    return out;
  };
  auto entries_a = args.condition_a.empty() ? config_inputs(config_json, "condition_a", base) : from_cli(args.condition_a);
  auto entries_b = args.condition_b.empty() ? config_inputs(config_json, "condition_b", base) : from_cli(args.condition_b);
  std::optional<fs::path> markers;
  if (!args.markers.empty()) markers = fs::path(args.markers);

  const auto a = load_subjects(std::move(entries_a), config, markers);
  const auto b = load_subjects(std::move(entries_b), config, markers);
  const auto report = pdc::run_pipeline(config, a, b, threads);
  pdc::write_report(args.out, report);
  std::size_t significant = 0;
  for (const auto& [key, t] : report.tests) significant += t.significant ? 1 : 0;
  std::cout << report.tests.size() << " hypotheses tested, " << significant << " significant after Holm-Bonferroni\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partial directed coherence toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // lets --threads follow the subcommand
  int threads_flag = 0;
  app.add_option("--threads", threads_flag, "Worker threads (falls back to PDC_TOOLKIT_THREADS)");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a recording from a VAR spec file");
  simulate->add_option("--config", sim.config, "Generator spec JSON")->required();
  simulate->add_option("--out", sim.out, "Output recording CSV")->required();
  simulate->add_option("--seed", sim.seed, "Override the spec's seed");

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a VAR model to a recording");
  fit_cmd->add_option("--input", fit.input, "Recording CSV")->required();
  fit_cmd->add_option("--sampling-rate", fit.sampling_rate, "Sampling rate in Hz")->required();
  fit_cmd->add_option("--order", fit.order, "Model order");
  fit_cmd->add_flag("--auto", fit.auto_order, "Choose the order by AIC");
  fit_cmd->add_option("--scan-max", fit.scan_max, "Highest order scanned with --auto");
  fit_cmd->add_flag("--allow-exceeding-bound", fit.allow_exceeding_bound, "Permit scans beyond the order bound");
  fit_cmd->add_flag("--no-center", fit.no_center, "Keep channel means");
  fit_cmd->add_option("--out", fit.out, "Output model JSON")->required();

  PdcArgs pdc_args;
  auto* pdc_cmd = app.add_subcommand("pdc", "Compute a PDC spectrum from a model or a recording");
  auto* model_opt = pdc_cmd->add_option("--model", pdc_args.model, "Model JSON");
  auto* input_opt = pdc_cmd->add_option("--input", pdc_args.input, "Recording CSV (fitted at --order)");
  model_opt->excludes(input_opt);
  pdc_cmd->add_option("--sampling-rate", pdc_args.sampling_rate, "Sampling rate in Hz");
  pdc_cmd->add_option("--order", pdc_args.order, "Order when fitting --input");
  pdc_cmd->add_option("--low", pdc_args.low, "Lowest grid frequency (Hz)");
  pdc_cmd->add_option("--high", pdc_args.high, "Highest grid frequency (Hz)");
  pdc_cmd->add_option("--step", pdc_args.step, "Grid step (Hz)");
  pdc_cmd->add_flag("--no-center", pdc_args.no_center, "Keep channel means when fitting --input");
  pdc_cmd->add_option("--out", pdc_args.out, "Output spectrum CSV")->required();

  BandsArgs bands;
  auto* bands_cmd = app.add_subcommand("bands", "Average a spectrum into frequency bands");
  bands_cmd->add_option("--spectrum", bands.spectrum, "Spectrum CSV")->required();
  bands_cmd->add_option("--band", bands.bands, "Band as name:low:high (repeatable; default theta/alpha/beta1/beta2)");
  bands_cmd->add_option("--sampling-rate", bands.sampling_rate, "Sampling rate in Hz");
  bands_cmd->add_option("--out", bands.out, "Output band JSON")->required();

  CompareArgs cmp;
  auto* compare = app.add_subcommand("compare", "Paired Wilcoxon tests with Holm-Bonferroni correction");
  compare->add_option("--condition-a", cmp.condition_a, "Band-value table for condition A")->required();
  compare->add_option("--condition-b", cmp.condition_b, "Band-value table for condition B")->required();
  compare->add_option("--alpha", cmp.alpha, "Family-wise significance level");
  compare->add_option("--exact-threshold", cmp.exact_threshold, "Largest n using the exact distribution");
  compare->add_option("--out", cmp.out, "Output test table CSV")->required();

  PipelineArgs pipe;
  auto* pipeline = app.add_subcommand("pipeline", "Run the full two-condition analysis");
  pipeline->add_option("--config", pipe.config, "Pipeline config JSON");
  pipeline->add_option("--condition-a", pipe.condition_a, "Recording CSVs for condition A");
  pipeline->add_option("--condition-b", pipe.condition_b, "Recording CSVs for condition B");
  pipeline->add_option("--markers", pipe.markers, "Epoch-start marker CSV shared by all recordings");
  pipeline->add_option("--sampling-rate", pipe.sampling_rate, "Override the config's sampling rate");
  pipeline->add_option("--out", pipe.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage_error: " << e.what() << '\n';
    return 2;
  }

  try {
    const std::size_t threads = pdc::resolve_thread_count(threads_flag);
    if (*simulate) return run_simulate(sim);
    if (*fit_cmd) return run_fit(fit);
    if (*pdc_cmd) {
      if (pdc_args.model.empty() && pdc_args.input.empty()) {
        pdc::fail(pdc::ErrorKind::argument, "pdc needs --model or --input");
      }
      return run_pdc(pdc_args);
    }
    if (*bands_cmd) return run_bands(bands);
    if (*compare) return run_compare(cmp);
    if (*pipeline) return run_pipeline_command(pipe, threads);
  } catch (const pdc::Error& e) {
    std::cerr << "error: " << pdc::to_string(e.kind()) << ": " << e.what() << '\n';
    return pdc::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: internal_error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
