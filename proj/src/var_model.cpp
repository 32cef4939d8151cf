#include "pdc/var_model.hpp"

#include <cmath>
#include <complex>
#include <limits>

#include <Eigen/Eigenvalues>

#include "pdc/error.hpp"
#include "pdc/parallel.hpp"

namespace pdc {

Eigen::MatrixXd lagged_design(const SampleMatrix& samples, int order) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index m = samples.cols();
  const Eigen::Index rows = n - order;
  Eigen::MatrixXd design(rows, m * order);
  for (int lag = 1; lag <= order; ++lag) {
    design.middleCols((lag - 1) * m, m) = samples.middleRows(order - lag, rows);
  }
  return design;
}

VarFit fit_var(const Segment& segment, int order) {
  if (order < 1) fail(ErrorKind::argument, "model order must be at least 1");
  const auto n = static_cast<Eigen::Index>(segment.n_samples());
  const auto m = static_cast<Eigen::Index>(segment.n_channels());
  const Eigen::Index rows = n - order;
  const Eigen::Index required = m * order + 1;
  if (rows < required) {
    fail(ErrorKind::argument, "VAR(" + std::to_string(order) + ") on " + std::to_string(m) + " channels needs at least " +
                                  std::to_string(required + order) + " samples, segment has " + std::to_string(n));
  }

  const Eigen::MatrixXd design = lagged_design(segment.samples(), order);
  const Eigen::MatrixXd targets = segment.samples().bottomRows(rows);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-12);
  if (qr.rank() < design.cols()) {
    fail(ErrorKind::estimation, "lagged regressor matrix is numerically singular (rank " + std::to_string(qr.rank()) +
                                    " of " + std::to_string(design.cols()) +
                                    "); channels are collinear or the data are constant");
  }
  const Eigen::MatrixXd beta = qr.solve(targets);  // (M p) x M

  VarFit fit;
  fit.residuals = targets - design * beta;
  fit.model.order = order;
  fit.model.n_samples_used = static_cast<std::size_t>(rows);
  fit.model.channel_labels = segment.channel_labels();
  fit.model.coefficients.reserve(static_cast<std::size_t>(order));
  for (int lag = 0; lag < order; ++lag) {
    fit.model.coefficients.emplace_back(beta.middleRows(lag * m, m).transpose());
  }
  Eigen::MatrixXd cov = fit.residuals.transpose() * fit.residuals / static_cast<double>(rows);
  fit.model.residual_covariance = 0.5 * (cov + cov.transpose());
  return fit;
}

double aic(const VarModel& model, std::size_t n) {
  if (n == 0) fail(ErrorKind::argument, "AIC needs a positive sample count");
  const Eigen::LLT<Eigen::MatrixXd> llt(model.residual_covariance);
  if (llt.info() != Eigen::Success) {
    fail(ErrorKind::evaluation, "residual covariance determinant is not positive; residuals are degenerate");
  }
  const Eigen::VectorXd diag = llt.matrixL().toDenseMatrix().diagonal();
  if ((diag.array() <= 0.0).any()) {
    fail(ErrorKind::evaluation, "residual covariance determinant is not positive; residuals are degenerate");
  }
  const double log_det = 2.0 * diag.array().log().sum();
  const double m = static_cast<double>(model.residual_covariance.rows());
  return static_cast<double>(n) * log_det + 2.0 * model.order * m * m;
}

int max_order_bound(std::size_t n, std::size_t m) {
  if (n < 1 || m < 1) fail(ErrorKind::argument, "order bound needs n >= 1 and m >= 1");
  const double limit = 3.0 * std::sqrt(static_cast<double>(n)) / static_cast<double>(m);
  auto bound = static_cast<long long>(std::ceil(limit)) - 1;  // largest integer strictly below
  if (bound < 1) {
    fail(ErrorKind::argument, "segment of " + std::to_string(n) + " samples is too short for a " + std::to_string(m) +
                                  "-channel model (order bound below 1)");
  }
  return static_cast<int>(bound);
}

OrderSelection select_order_from_aic(std::vector<std::pair<int, double>> aic_values, int cap) {
  if (aic_values.empty()) fail(ErrorKind::argument, "empty order scan range");
  OrderSelection sel;
  sel.aic_values = std::move(aic_values);
  const auto& v = sel.aic_values;
  if (v.size() >= 2 && v[0].second <= v[1].second) {
    sel.chosen_order = v[0].first;
    sel.rule = OrderRule::first_local_minimum;
    return sel;
  }
  for (std::size_t k = 1; k + 1 < v.size(); ++k) {
    if (v[k].second < v[k - 1].second && v[k].second <= v[k + 1].second) {
      sel.chosen_order = v[k].first;
      sel.rule = OrderRule::first_local_minimum;
      return sel;
    }
  }
  sel.chosen_order = std::min(v.back().first, cap);
  sel.rule = OrderRule::capped_by_bound;
  return sel;
}

OrderSelection select_order(const Segment& segment, const OrderScanOptions& options) {
  if (options.scan_max < 1) fail(ErrorKind::argument, "empty order scan range");
  int bound = options.scan_max;
  try {
    bound = max_order_bound(segment.n_samples(), segment.n_channels());
  } catch (const Error&) {
    if (!options.allow_exceeding_bound) throw;
  }
  if (options.scan_max > bound && !options.allow_exceeding_bound) {
    fail(ErrorKind::argument, "order scan up to " + std::to_string(options.scan_max) + " exceeds the bound " +
                                  std::to_string(bound) + " for this segment");
  }

  // Every candidate is fitted to the same targets (the last N - scan_max rows),
  // so the AIC values compare nested models on identical data.
  const auto n = static_cast<Eigen::Index>(segment.n_samples());
  const auto common_rows = static_cast<std::size_t>(n - options.scan_max);
  if (n <= options.scan_max) fail(ErrorKind::argument, "segment is shorter than the order scan range");
  std::vector<std::pair<int, double>> values(static_cast<std::size_t>(options.scan_max));
  parallel_for(values.size(), options.threads, [&](std::size_t k) {
    const int p = static_cast<int>(k) + 1;
    const auto skip = options.scan_max - p;
    const Segment window(segment.samples().bottomRows(n - skip), segment.sampling_rate_hz(), segment.channel_labels());
    values[k] = {p, aic(fit_var(window, p).model, common_rows)};
  });
  return select_order_from_aic(std::move(values), bound);
}

Eigen::MatrixXd companion_matrix(const VarModel& model) {
  const auto m = static_cast<Eigen::Index>(model.n_channels());
  const Eigen::Index dim = m * model.order;
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(dim, dim);
  for (int lag = 0; lag < model.order; ++lag) c.block(0, lag * m, m, m) = model.coefficients[static_cast<std::size_t>(lag)];
  if (model.order > 1) c.bottomLeftCorner(dim - m, dim - m).setIdentity();
  return c;
}

double spectral_radius(const VarModel& model) {
  if (model.order == 0 || model.n_channels() == 0) return 0.0;
  const Eigen::EigenSolver<Eigen::MatrixXd> solver(companion_matrix(model), false);
  if (solver.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

bool check_stability(const VarModel& model) { return spectral_radius(model) < 1.0 - 1e-9; }

std::string to_string(OrderRule rule) {
  return rule == OrderRule::first_local_minimum ? "first_local_minimum" : "capped_by_bound";
}

namespace {

nlohmann::json matrix_rows(const Eigen::MatrixXd& a) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < a.cols(); ++c) row.push_back(a(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_rows(const nlohmann::json& j, std::size_t m, const char* what) {
  if (!j.is_array() || j.size() != m) fail(ErrorKind::schema, std::string(what) + " must have " + std::to_string(m) + " rows");
  Eigen::MatrixXd a(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t r = 0; r < m; ++r) {
    if (!j[r].is_array() || j[r].size() != m) fail(ErrorKind::schema, std::string(what) + " must be square");
    for (std::size_t c = 0; c < m; ++c) {
      if (!j[r][c].is_number()) fail(ErrorKind::schema, std::string(what) + " entries must be numbers");
      a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return a;
}

}  // namespace

nlohmann::json model_to_json(const VarModel& model) {
  nlohmann::json j;
  j["order"] = model.order;
  j["channel_labels"] = model.channel_labels;
  auto coeffs = nlohmann::json::array();
  for (const auto& a : model.coefficients) coeffs.push_back(matrix_rows(a));
  j["coefficients"] = std::move(coeffs);
  j["residual_covariance"] = matrix_rows(model.residual_covariance);
  j["n_samples_used"] = model.n_samples_used;
  return j;
}

VarModel model_from_json(const nlohmann::json& j) {
  try {
    VarModel model;
    model.order = j.at("order").get<int>();
    model.channel_labels = j.at("channel_labels").get<std::vector<std::string>>();
    const std::size_t m = model.channel_labels.size();
    if (model.order < 1 || m < 1) fail(ErrorKind::schema, "model needs order >= 1 and at least one channel");
    const auto& coeffs = j.at("coefficients");
    if (!coeffs.is_array() || coeffs.size() != static_cast<std::size_t>(model.order)) {
      fail(ErrorKind::schema, "model must list exactly 'order' coefficient matrices");
    }
    for (const auto& a : coeffs) model.coefficients.push_back(matrix_from_rows(a, m, "coefficient matrix"));
    if (j.contains("residual_covariance")) {
      model.residual_covariance = matrix_from_rows(j["residual_covariance"], m, "residual_covariance");
    } else {
      model.residual_covariance = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    }
    model.n_samples_used = j.value("n_samples_used", std::size_t{0});
    return model;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::schema, std::string("invalid model JSON: ") + e.what());
  }
}

}  // namespace pdc
