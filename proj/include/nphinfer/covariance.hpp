#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

#include <Eigen/Dense>

#include "nphinfer/estimators.hpp"

namespace nphinfer {

enum class CovMethod { asymptotic, perturbation };

CovMethod parse_cov_method(std::string_view name);
std::string_view cov_method_name(CovMethod m);

struct CovarianceMatrix {
  Eigen::MatrixXd sigma;
  CovMethod method = CovMethod::asymptotic;
  bool ties_adjusted = false;
  std::array<Eigen::MatrixXd, 2> per_group;  // asymptotic only
  std::size_t n_rejected = 0;                 // perturbation: redrawn resamples
};

// Martingale variance weight at one event time: dN / Y^2, or with the tie
// correction sum_{j < dN} 1 / (Y - j)^2.
double tie_weight(int dN, int Y, bool adjust_ties);

CovarianceMatrix asymptotic_covariance(const EstimateVector& ev, const TwoSample& data,
                                       bool adjust_ties = false);

struct PerturbationOptions {
  std::size_t n_resamples = 25000;
  bool adjust_ties = false;
  unsigned threads = 0;
};

// Multiplier resampling of the Nelson-Aalen increments; each resample
// recomputes every functional from the perturbed curves.
CovarianceMatrix perturbation_covariance(const TwoSample& data, std::span<const ParameterSpec> specs,
                                         std::uint64_t seed, const PerturbationOptions& opts = {});

}  // namespace nphinfer
