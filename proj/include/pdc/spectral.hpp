#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pdc/var_model.hpp"

namespace pdc {

class FrequencyGrid {
 public:
  FrequencyGrid(std::vector<double> freqs_hz, double sampling_rate_hz);

  // low, low + step, ... up to and including high (within 1e-9 Hz).
  static FrequencyGrid uniform(double low_hz, double high_hz, double step_hz, double sampling_rate_hz);

  const std::vector<double>& freqs_hz() const { return freqs_hz_; }
  double sampling_rate_hz() const { return sampling_rate_hz_; }
  std::size_t size() const { return freqs_hz_.size(); }
  bool operator==(const FrequencyGrid&) const = default;

 private:
  std::vector<double> freqs_hz_;
  double sampling_rate_hz_;
};

// values[f](i, j): influence of source channel j on target channel i at grid frequency f.
struct PdcSpectrum {
  std::vector<Eigen::MatrixXd> values;
  FrequencyGrid grid;
  std::vector<std::string> channel_labels;
  // (frequency index, source column) pairs whose column norm vanished and were zeroed.
  std::vector<std::pair<std::size_t, std::size_t>> degenerate_columns;
};

struct BandEdges {
  double low_hz;
  double high_hz;
  bool operator==(const BandEdges&) const = default;
};

// Ordered so that dumps list bands in the conventional rhythm order.
using BandMap = std::vector<std::pair<std::string, BandEdges>>;

struct BandAverages {
  std::map<std::string, Eigen::MatrixXd> bands;
  BandMap band_edges_hz;
  std::vector<std::string> channel_labels;
};

// theta 4-7.5, alpha 8-12.5, beta1 13-20.5, beta2 21-30 Hz.
const BandMap& default_bands();

// Frequency-domain coefficient matrix:
//   diagonal    1 - sum_r a_ii(r) exp(-i 2 pi f r / fs)
//   off-diagonal    sum_r a_ij(r) exp(-i 2 pi f r / fs)
Eigen::MatrixXcd evaluate_transfer(const VarModel& model, double f_hz, double sampling_rate_hz);

// |A_ij(f)| / ||column j of A(f)||, clamped to [0, 1].
PdcSpectrum compute_pdc(const VarModel& model, const FrequencyGrid& grid);

// Elementwise mean per frequency. The mean spectrum is not column-normalized in general.
PdcSpectrum average_over_segments(const std::vector<PdcSpectrum>& spectra);

// Mean over grid frequencies inside each band, edges inclusive.
BandAverages band_average(const PdcSpectrum& spectrum, const BandMap& bands);

void write_spectrum_csv(const std::filesystem::path& path, const PdcSpectrum& spectrum);
// The grid's sampling rate is not stored in the CSV; the caller supplies it
// (non-positive means twice the highest listed frequency).
PdcSpectrum read_spectrum_csv(const std::filesystem::path& path, double sampling_rate_hz = 0.0);

nlohmann::json bands_to_json(const BandAverages& bands);

}  // namespace pdc
