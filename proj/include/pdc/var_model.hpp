#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pdc/signal.hpp"

namespace pdc {

// X(t) = sum_{i=1..p} A(i) X(t-i) + E(t), no intercept.
// Entry (k, m) of A(i) is the weight of channel m at lag i in channel k.
struct VarModel {
  int order = 0;
  std::vector<Eigen::MatrixXd> coefficients;  // A(1..p), each M x M
  Eigen::MatrixXd residual_covariance;        // residuals' residuals / (N - p)
  std::size_t n_samples_used = 0;             // regression rows, N - p
  std::vector<std::string> channel_labels;

  std::size_t n_channels() const { return channel_labels.size(); }
};

struct VarFit {
  VarModel model;
  Eigen::MatrixXd residuals;  // (N - p) x M
};

// Lagged regressor matrix: row r holds [X(r+p-1), X(r+p-2), ..., X(r)] for targets X(r+p).
Eigen::MatrixXd lagged_design(const SampleMatrix& samples, int order);

// Ordinary least squares via column-pivoted Householder QR.
VarFit fit_var(const Segment& segment, int order);

// n * ln det(Sigma) + 2 p M^2
double aic(const VarModel& model, std::size_t n);

// Largest integer strictly below 3 sqrt(n) / m.
int max_order_bound(std::size_t n, std::size_t m);

enum class OrderRule { first_local_minimum, capped_by_bound };

struct OrderSelection {
  std::vector<std::pair<int, double>> aic_values;
  int chosen_order = 0;
  OrderRule rule = OrderRule::first_local_minimum;
};

struct OrderScanOptions {
  int scan_max = 20;
  bool allow_exceeding_bound = false;
  std::size_t threads = 1;
};

/// Fits orders 1..scan_max on a common sample (the last N - scan_max targets,
/// which is also the n used in AIC) and picks the first interior local minimum of AIC,
/// i.e. the smallest p with AIC(p) < AIC(p-1) and AIC(p) <= AIC(p+1).
///
/// When AIC already rises from p = 1 to p = 2 the left edge counts as the
/// minimum and p = 1 is chosen. When no such point exists (monotone decrease,
/// or a decrease ending in plateaus) the order is capped at
/// min(scan_max, max_order_bound(N, M)).
OrderSelection select_order(const Segment& segment, const OrderScanOptions& options);
OrderSelection select_order_from_aic(std::vector<std::pair<int, double>> aic_values, int cap);

// (M p) x (M p) block companion matrix of A(1..p).
Eigen::MatrixXd companion_matrix(const VarModel& model);
double spectral_radius(const VarModel& model);
// All companion eigenvalue moduli below 1 - 1e-9.
bool check_stability(const VarModel& model);

std::string to_string(OrderRule rule);

nlohmann::json model_to_json(const VarModel& model);
VarModel model_from_json(const nlohmann::json& j);

}  // namespace pdc
