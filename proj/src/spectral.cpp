#include "pdc/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "csv_util.hpp"
#include "pdc/error.hpp"

namespace pdc {

namespace {
constexpr double kFreqTolerance = 1e-9;
constexpr double kZeroColumnNorm = 1e-12;
}  // namespace

FrequencyGrid::FrequencyGrid(std::vector<double> freqs_hz, double sampling_rate_hz)
    : freqs_hz_(std::move(freqs_hz)), sampling_rate_hz_(sampling_rate_hz) {
  if (!(sampling_rate_hz_ > 0.0)) fail(ErrorKind::argument, "grid sampling rate must be positive");
  if (freqs_hz_.empty()) fail(ErrorKind::argument, "frequency grid is empty");
  const double nyquist = sampling_rate_hz_ / 2.0;
  for (std::size_t k = 0; k < freqs_hz_.size(); ++k) {
    const double f = freqs_hz_[k];
    if (!(f >= 0.0) || f > nyquist + kFreqTolerance) {
      fail(ErrorKind::argument, "grid frequency " + detail::format_double(f) + " Hz lies outside [0, " +
                                    detail::format_double(nyquist) + "] Hz");
    }
    if (k > 0 && !(f > freqs_hz_[k - 1])) fail(ErrorKind::argument, "grid frequencies must be strictly increasing");
  }
}

FrequencyGrid FrequencyGrid::uniform(double low_hz, double high_hz, double step_hz, double sampling_rate_hz) {
  if (!(step_hz > 0.0) || !(high_hz >= low_hz)) fail(ErrorKind::argument, "invalid frequency grid bounds");
  const auto count = static_cast<std::size_t>(std::floor((high_hz - low_hz) / step_hz + kFreqTolerance)) + 1;
  std::vector<double> freqs(count);
  for (std::size_t k = 0; k < count; ++k) freqs[k] = low_hz + static_cast<double>(k) * step_hz;
  return FrequencyGrid(std::move(freqs), sampling_rate_hz);
}

const BandMap& default_bands() {
  static const BandMap bands{
      {"theta", {4.0, 7.5}},
      {"alpha", {8.0, 12.5}},
      {"beta1", {13.0, 20.5}},
      {"beta2", {21.0, 30.0}},
  };
  return bands;
}

Eigen::MatrixXcd evaluate_transfer(const VarModel& model, double f_hz, double sampling_rate_hz) {
  if (!(sampling_rate_hz > 0.0)) fail(ErrorKind::argument, "sampling rate must be positive");
  if (!(f_hz >= 0.0) || f_hz > sampling_rate_hz / 2.0 + kFreqTolerance) {
    fail(ErrorKind::argument, "frequency " + detail::format_double(f_hz) + " Hz is outside the Nyquist range");
  }
  const auto m = static_cast<Eigen::Index>(model.n_channels());
  const double normalized = f_hz / sampling_rate_hz;
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(m, m);
  for (int r = 1; r <= model.order; ++r) {
    const std::complex<double> phase = std::polar(1.0, -2.0 * std::numbers::pi * normalized * r);
    a += model.coefficients[static_cast<std::size_t>(r - 1)].cast<std::complex<double>>() * phase;
  }
  a.diagonal() = (1.0 - a.diagonal().array()).matrix();
  return a;
}

PdcSpectrum compute_pdc(const VarModel& model, const FrequencyGrid& grid) {
  const auto m = static_cast<Eigen::Index>(model.n_channels());
  PdcSpectrum out{{}, grid, model.channel_labels, {}};
  out.values.reserve(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Eigen::MatrixXd magnitude = evaluate_transfer(model, grid.freqs_hz()[k], grid.sampling_rate_hz()).cwiseAbs();
    Eigen::MatrixXd p(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      const double norm = magnitude.col(j).norm();
      if (norm < kZeroColumnNorm) {
        p.col(j).setZero();
        out.degenerate_columns.emplace_back(k, static_cast<std::size_t>(j));
      } else {
        p.col(j) = (magnitude.col(j) / norm).cwiseMin(1.0);
      }
    }
    out.values.push_back(std::move(p));
  }
  return out;
}

PdcSpectrum average_over_segments(const std::vector<PdcSpectrum>& spectra) {
  if (spectra.empty()) fail(ErrorKind::argument, "no spectra to average");
  const auto& first = spectra.front();
  PdcSpectrum out{first.values, first.grid, first.channel_labels, {}};
  // Running mean: averaging identical spectra reproduces them exactly.
  for (std::size_t s = 1; s < spectra.size(); ++s) {
    if (!(spectra[s].grid == first.grid) || spectra[s].channel_labels != first.channel_labels) {
      fail(ErrorKind::argument, "spectra to average must share frequency grid and channel labels");
    }
    const double weight = 1.0 / static_cast<double>(s + 1);
    for (std::size_t k = 0; k < out.values.size(); ++k) {
      out.values[k] += (spectra[s].values[k] - out.values[k]) * weight;
    }
  }
  for (const auto& s : spectra) {
    out.degenerate_columns.insert(out.degenerate_columns.end(), s.degenerate_columns.begin(),
                                  s.degenerate_columns.end());
  }
  return out;
}

BandAverages band_average(const PdcSpectrum& spectrum, const BandMap& bands) {
  BandAverages out;
  out.band_edges_hz = bands;
  out.channel_labels = spectrum.channel_labels;
  const auto m = static_cast<Eigen::Index>(spectrum.channel_labels.size());
  const auto& freqs = spectrum.grid.freqs_hz();
  for (const auto& [name, edges] : bands) {
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(m, m);
    std::size_t count = 0;
    for (std::size_t k = 0; k < freqs.size(); ++k) {
      if (freqs[k] >= edges.low_hz - kFreqTolerance && freqs[k] <= edges.high_hz + kFreqTolerance) {
        sum += spectrum.values[k];
        ++count;
      }
    }
    if (count == 0) {
      fail(ErrorKind::argument, "band '" + name + "' (" + detail::format_double(edges.low_hz) + "-" +
                                    detail::format_double(edges.high_hz) + " Hz) contains no grid frequency");
    }
    out.bands[name] = sum / static_cast<double>(count);
  }
  return out;
}

void write_spectrum_csv(const std::filesystem::path& path, const PdcSpectrum& spectrum) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write spectrum file '" + path.string() + "'");
  out << "freq_hz,source,target,pdc\n";
  const auto& labels = spectrum.channel_labels;
  for (std::size_t k = 0; k < spectrum.grid.size(); ++k) {
    for (std::size_t j = 0; j < labels.size(); ++j) {
      for (std::size_t i = 0; i < labels.size(); ++i) {
        out << detail::format_double(spectrum.grid.freqs_hz()[k]) << ',' << labels[j] << ',' << labels[i] << ','
            << detail::format_double(spectrum.values[k](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)))
            << '\n';
      }
    }
  }
  if (!out) fail(ErrorKind::io, "failed writing '" + path.string() + "'");
}

PdcSpectrum read_spectrum_csv(const std::filesystem::path& path, double sampling_rate_hz) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open spectrum file '" + path.string() + "'");
  struct Row {
    double freq;
    std::string source, target;
    double value;
  };
  std::vector<Row> rows;
  std::vector<std::string> labels;
  std::vector<double> freqs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_fields(line);
    if (line_no == 1) {
      if (fields.size() != 4 || fields[0] != "freq_hz" || fields[1] != "source" || fields[2] != "target" ||
          fields[3] != "pdc") {
        fail(ErrorKind::schema, path.string() + ": expected header 'freq_hz,source,target,pdc'");
      }
      continue;
    }
    const auto freq = fields.size() == 4 ? detail::parse_double(fields[0]) : std::nullopt;
    const auto value = fields.size() == 4 ? detail::parse_double(fields[3]) : std::nullopt;
    if (!freq || !value) fail(ErrorKind::schema, path.string() + ":" + std::to_string(line_no) + ": malformed row");
    rows.push_back({*freq, std::string(fields[1]), std::string(fields[2]), *value});
    for (const auto& label : {rows.back().source, rows.back().target}) {
      if (std::find(labels.begin(), labels.end(), label) == labels.end()) labels.push_back(label);
    }
    if (freqs.empty() || freqs.back() != *freq) {
      if (!freqs.empty() && *freq < freqs.back()) fail(ErrorKind::schema, path.string() + ": frequencies must be sorted");
      freqs.push_back(*freq);
    }
  }
  if (rows.empty()) fail(ErrorKind::schema, path.string() + ": spectrum has no rows");
  const auto m = static_cast<Eigen::Index>(labels.size());
  if (rows.size() != freqs.size() * labels.size() * labels.size()) {
    fail(ErrorKind::schema, path.string() + ": spectrum must list every (source, target) pair at every frequency");
  }
  const double fs = sampling_rate_hz > 0.0 ? sampling_rate_hz : 2.0 * freqs.back();
  PdcSpectrum out{std::vector<Eigen::MatrixXd>(freqs.size(), Eigen::MatrixXd::Constant(m, m, -1.0)),
                  FrequencyGrid(freqs, fs), labels, {}};
  std::size_t k = 0;
  for (const auto& row : rows) {
    while (freqs[k] != row.freq) ++k;
    const auto i = std::find(labels.begin(), labels.end(), row.target) - labels.begin();
    const auto j = std::find(labels.begin(), labels.end(), row.source) - labels.begin();
    out.values[k](i, j) = row.value;
  }
  for (const auto& v : out.values) {
    if ((v.array() < 0.0).any()) fail(ErrorKind::schema, path.string() + ": missing or negative PDC entries");
  }
  return out;
}

nlohmann::json bands_to_json(const BandAverages& bands) {
  nlohmann::json j;
  j["channel_labels"] = bands.channel_labels;
  auto edges = nlohmann::json::object();
  auto values = nlohmann::json::object();
  for (const auto& [name, e] : bands.band_edges_hz) {
    edges[name] = {e.low_hz, e.high_hz};
    const auto& a = bands.bands.at(name);
    auto rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      auto row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < a.cols(); ++c) row.push_back(a(r, c));
      rows.push_back(std::move(row));
    }
    values[name] = std::move(rows);
  }
  j["band_edges_hz"] = std::move(edges);
  j["bands"] = std::move(values);
  return j;
}

}  // namespace pdc
