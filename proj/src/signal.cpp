#include "pdc/signal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "csv_util.hpp"
#include "pdc/error.hpp"

namespace pdc {

namespace {

void require_finite(const SampleMatrix& samples, const char* what) {
  if (!samples.allFinite()) fail(ErrorKind::argument, std::string(what) + " contains non-finite sample values");
}

}  // namespace

Recording::Recording(SampleMatrix samples, double sampling_rate_hz, std::vector<std::string> channel_labels)
    : samples_(std::move(samples)), sampling_rate_hz_(sampling_rate_hz), channel_labels_(std::move(channel_labels)) {
  if (!(sampling_rate_hz_ > 0.0) || !std::isfinite(sampling_rate_hz_)) {
    fail(ErrorKind::argument, "sampling rate must be positive");
  }
  if (static_cast<std::size_t>(samples_.cols()) != channel_labels_.size()) {
    fail(ErrorKind::argument, "recording has " + std::to_string(samples_.cols()) + " columns but " +
                                  std::to_string(channel_labels_.size()) + " channel labels");
  }
  std::set<std::string> unique(channel_labels_.begin(), channel_labels_.end());
  if (unique.size() != channel_labels_.size()) fail(ErrorKind::argument, "channel labels must be unique");
  require_finite(samples_, "recording");
}

Segment::Segment(SampleMatrix samples, double sampling_rate_hz, std::vector<std::string> channel_labels,
                 std::size_t source_offset)
    : samples_(std::move(samples)),
      sampling_rate_hz_(sampling_rate_hz),
      channel_labels_(std::move(channel_labels)),
      source_offset_(source_offset) {
  if (!(sampling_rate_hz_ > 0.0)) fail(ErrorKind::argument, "sampling rate must be positive");
  if (static_cast<std::size_t>(samples_.cols()) != channel_labels_.size()) {
    fail(ErrorKind::argument, "segment column count does not match channel labels");
  }
  if (samples_.rows() < 2) fail(ErrorKind::argument, "segment needs at least 2 samples");
  require_finite(samples_, "segment");
}

Segment Segment::select_channels(const std::vector<std::size_t>& indices) const {
  SampleMatrix sub(samples_.rows(), static_cast<Eigen::Index>(indices.size()));
  std::vector<std::string> labels;
  labels.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= n_channels()) fail(ErrorKind::argument, "channel index out of range");
    sub.col(static_cast<Eigen::Index>(k)) = samples_.col(static_cast<Eigen::Index>(indices[k]));
    labels.push_back(channel_labels_[indices[k]]);
  }
  return Segment(std::move(sub), sampling_rate_hz_, std::move(labels), source_offset_);
}

Segment Segment::centered() const {
  SampleMatrix out = samples_.rowwise() - samples_.colwise().mean();
  return Segment(std::move(out), sampling_rate_hz_, channel_labels_, source_offset_);
}

double Segment::max_abs_amplitude() const { return samples_.cwiseAbs().maxCoeff(); }

std::size_t epoch_sample_count(double epoch_length_ms, double sampling_rate_hz) {
  if (!(epoch_length_ms > 0.0)) fail(ErrorKind::argument, "epoch length must be positive");
  const double rows = std::round(epoch_length_ms * sampling_rate_hz / 1000.0);
  if (rows < 2.0) fail(ErrorKind::argument, "epoch length yields fewer than 2 samples");
  return static_cast<std::size_t>(rows);
}

std::vector<Segment> extract_segments(const Recording& recording, double epoch_length_ms,
                                      const std::vector<double>& epoch_starts_ms) {
  const std::size_t n = epoch_sample_count(epoch_length_ms, recording.sampling_rate_hz());
  std::vector<Segment> out;
  out.reserve(epoch_starts_ms.size());
  for (const double start_ms : epoch_starts_ms) {
    const double start_row = std::round(start_ms * recording.sampling_rate_hz() / 1000.0);
    if (!std::isfinite(start_ms) || start_row < 0.0 ||
        start_row + static_cast<double>(n) > static_cast<double>(recording.n_samples())) {
      std::ostringstream msg;
      msg << "epoch starting at " << start_ms << " ms (" << epoch_length_ms
          << " ms long) does not fit inside the recording of " << recording.duration_ms() << " ms";
      fail(ErrorKind::range, msg.str());
    }
    const auto offset = static_cast<std::size_t>(start_row);
    out.emplace_back(recording.samples().middleRows(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(n)),
                     recording.sampling_rate_hz(), recording.channel_labels(), offset);
  }
  return out;
}

StationarityReport screen_stationarity(const Segment& segment, const StationarityOptions& options) {
  if (options.n_windows < 2) fail(ErrorKind::argument, "stationarity screen needs at least 2 windows");
  const auto windows = static_cast<std::size_t>(options.n_windows);
  if (segment.n_samples() < 2 * windows) {
    fail(ErrorKind::argument, "segment of " + std::to_string(segment.n_samples()) + " samples is too short for " +
                                  std::to_string(windows) + " stationarity windows");
  }
  const auto len = static_cast<Eigen::Index>(segment.n_samples() / windows);
  const auto m = static_cast<Eigen::Index>(segment.n_channels());

  StationarityReport report;
  for (std::size_t w = 0; w < windows; ++w) {
    const auto block = segment.samples().middleRows(static_cast<Eigen::Index>(w) * len, len);
    Eigen::VectorXd mean = block.colwise().mean().transpose();
    Eigen::VectorXd var(m);
    for (Eigen::Index c = 0; c < m; ++c) {
      var(c) = (block.col(c).array() - mean(c)).square().sum() / static_cast<double>(len - 1);
    }
    report.per_window_means.push_back(std::move(mean));
    report.per_window_variances.push_back(std::move(var));
  }

  constexpr double inf = std::numeric_limits<double>::infinity();
  double drift = 0.0;
  double ratio = 0.0;
  for (Eigen::Index c = 0; c < m; ++c) {
    double lo_mean = inf, hi_mean = -inf, lo_var = inf, hi_var = -inf, var_sum = 0.0;
    for (std::size_t w = 0; w < windows; ++w) {
      lo_mean = std::min(lo_mean, report.per_window_means[w](c));
      hi_mean = std::max(hi_mean, report.per_window_means[w](c));
      lo_var = std::min(lo_var, report.per_window_variances[w](c));
      hi_var = std::max(hi_var, report.per_window_variances[w](c));
      var_sum += report.per_window_variances[w](c);
    }
    const double pooled_sd = std::sqrt(var_sum / static_cast<double>(windows));
    const double spread = hi_mean - lo_mean;
    drift = std::max(drift, pooled_sd > 0.0 ? spread / pooled_sd : (spread > 0.0 ? inf : 0.0));
    ratio = std::max(ratio, lo_var > 0.0 ? hi_var / lo_var : inf);
  }
  report.mean_drift_score = drift;
  report.variance_ratio_score = ratio;
  report.passed = drift <= options.mean_tolerance && ratio <= options.variance_tolerance;
  return report;
}

Recording read_recording_csv(const std::filesystem::path& path, double sampling_rate_hz) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open recording file '" + path.string() + "'");
  std::string line;
  std::vector<std::string> labels;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    for (const auto field : detail::split_fields(line)) labels.emplace_back(field);
    break;
  }
  if (labels.empty()) fail(ErrorKind::schema, "recording file '" + path.string() + "' has no header row");

  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_fields(line);
    if (fields.size() != labels.size()) {
      fail(ErrorKind::schema, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                  std::to_string(labels.size()) + " fields, found " + std::to_string(fields.size()));
    }
    for (const auto field : fields) {
      const auto v = detail::parse_double(field);
      if (!v || !std::isfinite(*v)) {
        fail(ErrorKind::schema, path.string() + ":" + std::to_string(line_no) + ": invalid sample value '" +
                                    std::string(field) + "'");
      }
      values.push_back(*v);
    }
    ++rows;
  }
  SampleMatrix samples =
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          values.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(labels.size()));
  try {
    return Recording(std::move(samples), sampling_rate_hz, std::move(labels));
  } catch (const Error& e) {
    fail(ErrorKind::schema, path.string() + ": " + e.what());
  }
}

void write_recording_csv(const std::filesystem::path& path, const Recording& recording) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write recording file '" + path.string() + "'");
  const auto& labels = recording.channel_labels();
  for (std::size_t c = 0; c < labels.size(); ++c) out << (c ? "," : "") << labels[c];
  out << '\n';
  const auto& s = recording.samples();
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    for (Eigen::Index c = 0; c < s.cols(); ++c) out << (c ? "," : "") << detail::format_double(s(r, c));
    out << '\n';
  }
  if (!out) fail(ErrorKind::io, "failed writing '" + path.string() + "'");
}

std::vector<double> read_markers_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open marker file '" + path.string() + "'");
  std::vector<double> starts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto v = detail::parse_double(detail::split_fields(text).front());
    if (!v) {
      if (starts.empty() && line_no == 1) continue;  // header
      fail(ErrorKind::schema, path.string() + ":" + std::to_string(line_no) + ": invalid epoch start '" +
                                  std::string(text) + "'");
    }
    starts.push_back(*v);
  }
  return starts;
}

}  // namespace pdc
