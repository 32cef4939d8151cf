#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pdc {

// Samples are stored time-major: rows are time points, columns are channels.
using SampleMatrix = Eigen::MatrixXd;

class Recording {
 public:
  Recording(SampleMatrix samples, double sampling_rate_hz, std::vector<std::string> channel_labels);

  const SampleMatrix& samples() const { return samples_; }
  double sampling_rate_hz() const { return sampling_rate_hz_; }
  const std::vector<std::string>& channel_labels() const { return channel_labels_; }
  std::size_t n_samples() const { return static_cast<std::size_t>(samples_.rows()); }
  std::size_t n_channels() const { return static_cast<std::size_t>(samples_.cols()); }
  double duration_ms() const { return 1000.0 * static_cast<double>(n_samples()) / sampling_rate_hz_; }

 private:
  SampleMatrix samples_;
  double sampling_rate_hz_;
  std::vector<std::string> channel_labels_;
};

// One analysis epoch cut from a recording.
class Segment {
 public:
  Segment(SampleMatrix samples, double sampling_rate_hz, std::vector<std::string> channel_labels,
          std::size_t source_offset = 0);

  const SampleMatrix& samples() const { return samples_; }
  double sampling_rate_hz() const { return sampling_rate_hz_; }
  const std::vector<std::string>& channel_labels() const { return channel_labels_; }
  std::size_t source_offset() const { return source_offset_; }
  std::size_t n_samples() const { return static_cast<std::size_t>(samples_.rows()); }
  std::size_t n_channels() const { return static_cast<std::size_t>(samples_.cols()); }

  // Sub-segment restricted to the given channel indices, in the given order.
  Segment select_channels(const std::vector<std::size_t>& indices) const;
  // Copy with each channel's mean subtracted.
  Segment centered() const;
  double max_abs_amplitude() const;

 private:
  SampleMatrix samples_;
  double sampling_rate_hz_;
  std::vector<std::string> channel_labels_;
  std::size_t source_offset_;
};

struct StationarityReport {
  bool passed = false;
  std::vector<Eigen::VectorXd> per_window_means;
  std::vector<Eigen::VectorXd> per_window_variances;
  double mean_drift_score = 0.0;
  double variance_ratio_score = 0.0;
};

struct StationarityOptions {
  int n_windows = 3;
  double mean_tolerance = 0.5;      // tau_mu
  double variance_tolerance = 2.0;  // tau_sigma
};

// Number of rows an epoch of the given length occupies at the given rate.
std::size_t epoch_sample_count(double epoch_length_ms, double sampling_rate_hz);

std::vector<Segment> extract_segments(const Recording& recording, double epoch_length_ms,
                                      const std::vector<double>& epoch_starts_ms);

/// Windowed weak-stationarity screen.
///
/// The segment is cut into `n_windows` equal contiguous windows (tail remainder
/// dropped). The mean-drift score is the largest per-channel spread of window
/// means divided by the channel's pooled within-window standard deviation; the
/// variance-ratio score is the largest per-channel max/min window variance. Any
/// zero-variance window makes the ratio infinite and the screen fail.
StationarityReport screen_stationarity(const Segment& segment, const StationarityOptions& options = {});

// CSV recording: header row of channel labels, then one row per time point.
Recording read_recording_csv(const std::filesystem::path& path, double sampling_rate_hz);
void write_recording_csv(const std::filesystem::path& path, const Recording& recording);

// Marker file: one epoch start (ms) per line. Blank lines and '#' comments are skipped,
// as is a non-numeric first line (header).
std::vector<double> read_markers_csv(const std::filesystem::path& path);

}  // namespace pdc
