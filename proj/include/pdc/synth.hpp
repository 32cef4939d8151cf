#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pdc/signal.hpp"

namespace pdc {

struct GeneratorSpec {
  std::vector<Eigen::MatrixXd> coefficients;  // A(1..p)
  Eigen::MatrixXd innovation_covariance;
  std::size_t n_samples = 0;
  std::size_t burn_in = 500;
  std::uint64_t seed = 0;
  double sampling_rate_hz = 250.0;
  std::vector<std::string> channel_labels;  // defaults to X1..XM when empty
};

// Deterministic standard normal draws addressed by (seed, index); the value at
// an index never depends on how many other draws were taken.
class CounterNormal {
 public:
  explicit CounterNormal(std::uint64_t seed) : seed_(seed) {}
  double operator()(std::uint64_t index) const;

 private:
  std::uint64_t seed_;
};

// Simulates the VAR process from a zero initial state and drops the burn-in.
// Rejects unstable coefficient sets and non positive-definite covariances.
Recording generate(const GeneratorSpec& spec);

GeneratorSpec generator_spec_from_json(const nlohmann::json& j);
nlohmann::json generator_spec_to_json(const GeneratorSpec& spec);

}  // namespace pdc
