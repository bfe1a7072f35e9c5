#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "nphinfer/covariance.hpp"
#include "nphinfer/estimators.hpp"
#include "nphinfer/survdata.hpp"

namespace nphinfer {

struct LogNormalLaw {
  double meanlog = 0.0;
  double sdlog = 1.0;
};

struct WeibullLaw {
  double scale = 1.0;
  double shape = 1.0;
};

struct ExponentialLaw {
  double rate = 1.0;
};

// Progression and death as competing constant-rate processes; after
// progression death occurs at death_post. A cure_fraction of subjects never
// has the event. With switch_probability > 0, a progressing subject switches
// treatment and is then cured with probability switch_cure_fraction.
struct MultiStateLaw {
  double death_pre = 1.0;
  double death_post = 1.0;
  double progression = 1.0;
  double cure_fraction = 0.0;
  double switch_probability = 0.0;
  double switch_cure_fraction = 0.0;
};

using ArmModel = std::variant<LogNormalLaw, WeibullLaw, ExponentialLaw, MultiStateLaw>;

double law_survival(const ArmModel& law, double t);
double law_density(const ArmModel& law, double t);
double law_sample(const ArmModel& law, std::mt19937_64& rng);
std::string describe(const ArmModel& law);

struct ScenarioConfig {
  int id = 0;
  std::string name;
  std::array<ArmModel, 2> arms{ExponentialLaw{}, ExponentialLaw{}};  // control, treatment
  double recruit_years = 1.0;
  double max_followup_years = 3.5;  // total study duration from first enrolment
  double censor_rate = 0.10536051565782628;  // -log(0.9)
  bool round_to_days = true;
  bool null_variant = false;

  void validate() const;
};

ScenarioConfig scenario_preset(int id);
// Both arms follow the control law.
ScenarioConfig null_variant(const ScenarioConfig& cfg);

std::vector<SubjectRecord> simulate_trial(const ScenarioConfig& cfg, std::size_t n_per_arm,
                                          std::uint64_t seed);

// Population value of a parameter under the scenario laws; NaN for the
// design-dependent kinds (score, Cox) unless the arms coincide.
double true_value(const ScenarioConfig& cfg, const ParameterSpec& spec);

// Parameter sets 1-7 with one-sided alternatives for benefit of group 1.
std::vector<ParameterSpec> parameter_set(int id);

struct StudyOptions {
  double alpha = 0.025;     // one-sided familywise test level
  double ci_alpha = 0.05;   // two-sided simultaneous intervals
  CovMethod cov_method = CovMethod::asymptotic;
  std::size_t n_resamples = 1000;
  bool adjust_ties = true;
  std::size_t mvn_draws = 20000;
  bool closed_test = true;
  unsigned threads = 0;
  EstimatorOptions estimator;
};

struct SpecSummary {
  std::string label;
  double truth = 0.0;
  double mean_estimate = 0.0;
  double sd_estimate = 0.0;
  double mean_report = 0.0;
  double coverage_unadjusted = 0.0;
  double coverage_adjusted = 0.0;
  double coverage_bonferroni = 0.0;
  double reject_unadjusted = 0.0;
  double reject_closed = 0.0;
  double reject_single_step = 0.0;
  double reject_holm = 0.0;
};

struct ReplicationSummary {
  std::size_t n_reps = 0;
  std::size_t n_used = 0;
  std::size_t n_excluded = 0;
  std::map<std::string, std::size_t> exclusions;  // error message -> count
  std::vector<SpecSummary> specs;
  double simultaneous_coverage_adjusted = 0.0;
  double simultaneous_coverage_unadjusted = 0.0;
  double simultaneous_coverage_bonferroni = 0.0;
  double any_unadjusted = 0.0;
  double any_closed = 0.0;
  double any_single_step = 0.0;
  double any_holm = 0.0;
  std::vector<std::vector<double>> estimates;  // per used replication
};

// Data of replication r of a study with the given seed.
std::vector<SubjectRecord> study_replicate_data(const ScenarioConfig& cfg, std::size_t n_per_arm,
                                                std::uint64_t seed, std::size_t r);

ReplicationSummary run_study(const ScenarioConfig& cfg, std::span<const ParameterSpec> specs,
                             std::size_t n_per_arm, std::size_t n_reps, std::uint64_t seed,
                             const StudyOptions& opts = {});

}  // namespace nphinfer
