#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nphinfer/survdata.hpp"

namespace nphinfer {

enum class ParamKind {
  SurvivalDiff,
  SurvivalLogRatio,
  CloglogDiff,
  QuantileDiff,
  QuantileLogRatio,
  AvgHazardRatioLog,
  RmstDiff,
  LogrankScore,
  CoxLogHR,
};

enum class Alternative { greater, less, two_sided };

// One target parameter. `arg` is a milestone time for the survival kinds, a
// probability for the quantile kinds and the cutoff L (years) otherwise.
// null_value lives on the analysis scale.
struct ParameterSpec {
  ParamKind kind = ParamKind::SurvivalDiff;
  double arg = 1.0;
  Alternative alternative = Alternative::greater;
  double null_value = 0.0;

  void validate() const;
  std::string label() const;  // e.g. "S(2)", "Q(0.5)", "RMST(3.5)"
};

// Short names used on the command line: S, logS, cloglogS, Q, logQ, avgHR,
// RMST, score, HR. Matching is case-insensitive.
ParamKind parse_kind(std::string_view name);
std::string_view kind_name(ParamKind kind);
Alternative parse_alternative(std::string_view name);
std::string_view alternative_name(Alternative alt);
// "kind:arg[:alternative[:null]]"
ParameterSpec parse_spec(std::string_view text);

// Kinds estimated on a log scale and reported as exp(theta).
bool is_log_scale(ParamKind kind);
double to_report_scale(ParamKind kind, double value);

struct EstimatorOptions {
  double bandwidth = 2.0;  // local hazard window constant for quantile rows
};

// Ingredients of the martingale representation for one group:
//   theta_i - theta_i,true ~ a * int_0^horizon H(s) / Y(s) dM(s).
// H holds H(s) at the group's event times s <= horizon (a prefix of the
// group's risk table).
struct InfluenceIngredients {
  double a = 0.0;
  std::vector<double> H;
  double horizon = 0.0;
};

struct Estimate {
  double theta = 0.0;                 // per_group[1] - per_group[0]
  std::array<double, 2> per_group{};  // analysis scale
  std::array<InfluenceIngredients, 2> ingredients;
};

struct EstimateVector {
  std::vector<ParameterSpec> specs;
  std::vector<Estimate> estimates;

  std::size_t size() const noexcept { return specs.size(); }
  std::vector<double> theta() const;
};

Estimate estimate_survival_diff(const TwoSample& data, double t);
Estimate estimate_survival_log_ratio(const TwoSample& data, double t);
Estimate estimate_cloglog_diff(const TwoSample& data, double t);
Estimate estimate_quantile_diff(const TwoSample& data, double gamma, bool log_scale,
                                const EstimatorOptions& opts = {});
Estimate estimate_avg_hazard_ratio(const TwoSample& data, double cutoff);
Estimate estimate_rmst_diff(const TwoSample& data, double cutoff);
Estimate estimate_logrank_score(const TwoSample& data, double cutoff);
Estimate estimate_cox_log_hr(const TwoSample& data, double cutoff);

Estimate estimate(const TwoSample& data, const ParameterSpec& spec,
                  const EstimatorOptions& opts = {});
// Throws SpecError naming the first spec that fails.
EstimateVector estimate_all(const TwoSample& data, std::span<const ParameterSpec> specs,
                            const EstimatorOptions& opts = {});

// Value of a parameter as a functional of the two cumulative hazard curves.
// Curve j must share the event-time grid of data[j]; at-risk counts come from
// data. With the Nelson-Aalen curves this reproduces estimate().theta; the
// perturbation covariance feeds perturbed curves through it.
double parameter_functional(const ParameterSpec& spec, const TwoSample& data,
                            const std::array<HazardCurve, 2>& curves);

// Observed-minus-expected logrank score on the pooled event grid, s <= cutoff.
double logrank_observed_minus_expected(const TwoSample& data, double cutoff);

// Two-sample Cox score on the pooled grid restricted to s <= cutoff:
//   U(beta) = sum_s [Y0 c1 - Y1 e^beta c0] / (Y0 + Y1 e^beta)
// with c_i = dN_i (or Y_i dLambda_i for a perturbed curve).
struct CoxScoreTerms {
  std::vector<double> y0, y1, c0, c1;

  double score(double beta) const;
  double score_derivative(double beta) const;
};

CoxScoreTerms cox_score_terms(const TwoSample& data, const std::array<HazardCurve, 2>& curves,
                              double cutoff);
// Damped Newton from beta = 0; throws NonconvergentFit on monotone likelihood
// or when the iteration cap is hit.
double solve_cox(const CoxScoreTerms& terms);

}  // namespace nphinfer
