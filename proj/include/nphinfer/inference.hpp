#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nphinfer/covariance.hpp"
#include "nphinfer/estimators.hpp"

namespace nphinfer {

enum class Sided { one, two };

Sided parse_sided(std::string_view name);
std::string_view sided_name(Sided s);

// T oriented so that large values argue against H_k. For a two-sided
// component T_k = |theta - theta0| / se and the matching null coordinate is
// |Z_k|. R is the null correlation of the oriented statistics.
struct TestStatistics {
  Eigen::VectorXd T;
  Eigen::VectorXd se;
  Eigen::MatrixXd R;
  std::vector<Alternative> orientation;

  std::size_t size() const noexcept { return static_cast<std::size_t>(T.size()); }
};

// Orientation from the spec alternatives (Sided::one) or two-sided for every
// component (Sided::two).
TestStatistics make_test_statistics(const EstimateVector& ev, const CovarianceMatrix& cov,
                                    Sided sided = Sided::one);

// Unit-diagonal correlation of a covariance matrix; small negative
// eigenvalues are clipped. Throws InvalidCorrelation beyond -1e-6.
Eigen::MatrixXd correlation_from_covariance(const Eigen::MatrixXd& sigma);
Eigen::MatrixXd repair_correlation(const Eigen::MatrixXd& R);

// Lower-triangular-ish factor F with F F^T = R.
Eigen::MatrixXd correlation_factor(const Eigen::MatrixXd& R);

// Antithetic multivariate normal draws N(0, R), generated in fixed-size
// blocks each from its own substream.
class MvnDraws {
 public:
  MvnDraws(const Eigen::MatrixXd& R, std::size_t draws, std::uint64_t seed);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(Z_.rows()); }
  std::size_t count() const noexcept { return static_cast<std::size_t>(Z_.cols()); }
  // column d is one draw
  const Eigen::MatrixXd& Z() const noexcept { return Z_; }

 private:
  Eigen::MatrixXd Z_;
};

inline constexpr std::size_t kDefaultMvnDraws = 1000000;

double mvn_max_tail(const Eigen::MatrixXd& R, double c, std::size_t draws, std::uint64_t seed,
                    bool two_sided = false);

double unadjusted_p(double t, Alternative orientation);

struct SingleStepResult {
  double p_global = 1.0;
  std::vector<double> p;
};

SingleStepResult single_step(const TestStatistics& ts, std::size_t draws, std::uint64_t seed);
SingleStepResult single_step(const TestStatistics& ts, const MvnDraws& z);

inline constexpr std::size_t kMaxClosedTestParameters = 15;

// Closed test over every nonempty subset with max-type intersection tests;
// all subsets share one draw matrix.
std::vector<double> closed_test(const TestStatistics& ts, std::size_t draws, std::uint64_t seed);
std::vector<double> closed_test(const TestStatistics& ts, const MvnDraws& z);

std::vector<double> holm_adjust(const std::vector<double>& p);

enum class CiMethod { mvn, bonferroni, unadjusted };

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

struct CiResult {
  CiMethod method = CiMethod::mvn;
  double level = 0.95;
  std::vector<double> critical;  // per component
  std::vector<Interval> analysis;
  std::vector<Interval> report;
};

// Bounds theta -/+ se * q. Two-sided components get both bounds, one-sided
// ones a single bound with the other side infinite.
CiResult simultaneous_ci(const TestStatistics& ts, const EstimateVector& ev, double alpha,
                         CiMethod method, const MvnDraws* z = nullptr);

// Root of P{max_k Zo_k >= q} = alpha on the given draws (bisection).
double mvn_critical_value(const TestStatistics& ts, const MvnDraws& z, double alpha);

struct InferenceOptions {
  double alpha = 0.05;
  Sided sided = Sided::two;
  std::size_t draws = kDefaultMvnDraws;
  std::uint64_t seed = 1;
  bool closed_test = true;
};

struct InferenceReport {
  TestStatistics stats;
  std::vector<double> p_unadjusted;
  std::vector<double> p_single_step;
  std::vector<double> p_closed;  // empty when the closed test is off
  std::vector<double> p_holm;
  double p_global = 1.0;
  CiResult ci_mvn;
  CiResult ci_bonferroni;
  CiResult ci_unadjusted;
  double alpha = 0.05;
  std::size_t mvn_draws = 0;
  std::uint64_t seed = 0;

  // closed-test values when computed, else single-step
  const std::vector<double>& p_adjusted() const noexcept {
    return p_closed.empty() ? p_single_step : p_closed;
  }
};

InferenceReport infer(const EstimateVector& ev, const CovarianceMatrix& cov, const InferenceOptions& opts);

}  // namespace nphinfer
