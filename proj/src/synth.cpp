#include "pdc/synth.hpp"

#include <cmath>
#include <numbers>

#include "pdc/error.hpp"
#include "pdc/var_model.hpp"

namespace pdc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform in (0, 1) from the top 53 bits.
double open_unit(std::uint64_t bits) { return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53; }

}  // namespace

double CounterNormal::operator()(std::uint64_t index) const {
  const std::uint64_t key = splitmix64(seed_);
  const double u1 = open_unit(splitmix64(key ^ splitmix64(2 * index)));
  const double u2 = open_unit(splitmix64(key ^ splitmix64(2 * index + 1)));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Recording generate(const GeneratorSpec& spec) {
  if (spec.coefficients.empty()) fail(ErrorKind::argument, "generator needs at least one coefficient matrix");
  const auto m = spec.innovation_covariance.rows();
  if (m < 1 || spec.innovation_covariance.cols() != m) fail(ErrorKind::argument, "innovation covariance must be square");
  for (const auto& a : spec.coefficients) {
    if (a.rows() != m || a.cols() != m) fail(ErrorKind::argument, "coefficient matrices must match covariance size");
  }
  if (spec.n_samples < 1) fail(ErrorKind::argument, "generator needs n_samples >= 1");
  if ((spec.innovation_covariance - spec.innovation_covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    fail(ErrorKind::argument, "innovation covariance is not symmetric");
  }
  const Eigen::LLT<Eigen::MatrixXd> chol(spec.innovation_covariance);
  if (chol.info() != Eigen::Success || (chol.matrixL().toDenseMatrix().diagonal().array() <= 0.0).any()) {
    fail(ErrorKind::argument, "innovation covariance is not positive definite");
  }

  std::vector<std::string> labels = spec.channel_labels;
  if (labels.empty()) {
    for (Eigen::Index c = 0; c < m; ++c) labels.push_back("X" + std::to_string(c + 1));
  }
  if (static_cast<Eigen::Index>(labels.size()) != m) fail(ErrorKind::argument, "channel label count mismatch");

  VarModel model;
  model.order = static_cast<int>(spec.coefficients.size());
  model.coefficients = spec.coefficients;
  model.channel_labels = labels;
  if (!check_stability(model)) {
    fail(ErrorKind::argument, "generator coefficients are unstable (spectral radius " +
                                  std::to_string(spectral_radius(model)) + ")");
  }

  const Eigen::MatrixXd lower = chol.matrixL();
  const int p = model.order;
  const std::size_t total = spec.n_samples + spec.burn_in;
  const CounterNormal normal(spec.seed);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(total), m);
  Eigen::VectorXd z(m);
  for (std::size_t t = 0; t < total; ++t) {
    for (Eigen::Index c = 0; c < m; ++c) z(c) = normal(t * static_cast<std::uint64_t>(m) + static_cast<std::uint64_t>(c));
    Eigen::VectorXd next = lower * z;
    for (int lag = 1; lag <= p && static_cast<std::size_t>(lag) <= t; ++lag) {
      next += spec.coefficients[static_cast<std::size_t>(lag - 1)] * x.row(static_cast<Eigen::Index>(t) - lag).transpose();
    }
    x.row(static_cast<Eigen::Index>(t)) = next.transpose();
  }
  return Recording(x.bottomRows(static_cast<Eigen::Index>(spec.n_samples)), spec.sampling_rate_hz, std::move(labels));
}

namespace {

Eigen::MatrixXd square_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.empty()) fail(ErrorKind::schema, std::string(what) + " must be a non-empty array of rows");
  const auto m = static_cast<Eigen::Index>(j.size());
  Eigen::MatrixXd a(m, m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != m) {
      fail(ErrorKind::schema, std::string(what) + " must be square");
    }
    for (Eigen::Index c = 0; c < m; ++c) a(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return a;
}

nlohmann::json rows_json(const Eigen::MatrixXd& a) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < a.cols(); ++c) row.push_back(a(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

GeneratorSpec generator_spec_from_json(const nlohmann::json& j) {
  try {
    GeneratorSpec spec;
    for (const auto& a : j.at("coefficients")) spec.coefficients.push_back(square_from_json(a, "coefficient matrix"));
    spec.innovation_covariance = square_from_json(j.at("innovation_covariance"), "innovation_covariance");
    spec.n_samples = j.at("n_samples").get<std::size_t>();
    spec.burn_in = j.value("burn_in", std::size_t{500});
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.sampling_rate_hz = j.value("sampling_rate_hz", 250.0);
    spec.channel_labels = j.value("channel_labels", std::vector<std::string>{});
    return spec;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::schema, std::string("invalid generator spec: ") + e.what());
  }
}

nlohmann::json generator_spec_to_json(const GeneratorSpec& spec) {
  nlohmann::json j;
  auto coeffs = nlohmann::json::array();
  for (const auto& a : spec.coefficients) coeffs.push_back(rows_json(a));
  j["coefficients"] = std::move(coeffs);
  j["innovation_covariance"] = rows_json(spec.innovation_covariance);
  j["n_samples"] = spec.n_samples;
  j["burn_in"] = spec.burn_in;
  j["seed"] = spec.seed;
  j["sampling_rate_hz"] = spec.sampling_rate_hz;
  if (!spec.channel_labels.empty()) j["channel_labels"] = spec.channel_labels;
  return j;
}

}  // namespace pdc
