#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "nphinfer/covariance.hpp"
#include "nphinfer/estimators.hpp"
#include "nphinfer/inference.hpp"
#include "nphinfer/survdata.hpp"

namespace nphinfer {

struct AnalysisConfig {
  std::vector<ParameterSpec> specs;
  double alpha = 0.05;
  Sided sided = Sided::two;
  CovMethod cov_method = CovMethod::asymptotic;
  std::size_t n_resamples = 25000;
  bool adjust_ties = false;
  std::size_t mvn_draws = kDefaultMvnDraws;
  std::uint64_t seed = 1;
  bool closed_test = false;
  EstimatorOptions estimator;
  unsigned threads = 0;

  void validate() const;
};

struct AnalysisResult {
  AnalysisConfig config;
  EstimateVector estimates;
  CovarianceMatrix covariance;
  InferenceReport report;
};

// survdata -> estimators -> covariance -> inference. Estimation failures are
// rethrown as SpecError naming the parameter.
AnalysisResult analyze(std::span<const SubjectRecord> records, const AnalysisConfig& cfg);

nlohmann::json to_json(const AnalysisResult& res);
// Fixed-width table: per-group values, difference and three interval
// columns, followed by the p-values.
std::string format_table(const AnalysisResult& res);

}  // namespace nphinfer
