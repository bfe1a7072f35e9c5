#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace nphinfer {

struct SubjectRecord {
  double time = 0.0;   // years
  bool event = false;  // true = event observed
  int group = 0;       // 0 = control, 1 = treatment
};

// Counting-process summary of one group.
//
// distinct_times holds the observed event times t_1 < ... < t_D.
// n_censored_between has D + 1 entries: entry 0 counts censorings before t_1,
// entry j >= 1 counts censorings in [t_j, t_{j+1}) (t_{D+1} = +inf). A subject
// censored at an event time is still at risk at that time.
struct RiskTable {
  std::vector<double> distinct_times;
  std::vector<int> dN;
  std::vector<int> n_censored_between;
  std::vector<int> Y;
  int n_total = 0;

  std::size_t size() const noexcept { return distinct_times.size(); }
  int total_events() const noexcept;
};

// Right-continuous step function for a cumulative hazard with jumps at
// `times`. Built by nelson_aalen() it is non-decreasing; perturbed copies
// (covariance resampling) may have negative increments.
class HazardCurve {
 public:
  HazardCurve() = default;
  HazardCurve(std::vector<double> times, std::vector<double> increments);

  const std::vector<double>& times() const noexcept { return times_; }
  const std::vector<double>& increments() const noexcept { return increments_; }
  // cumulative value right after the jump at times()[j]
  const std::vector<double>& cumulative() const noexcept { return cumulative_; }
  std::size_t size() const noexcept { return times_.size(); }

  double cum_hazard(double t) const;       // sum over jumps at s <= t
  double cum_hazard_left(double t) const;  // sum over jumps at s < t
  double survival(double t) const;
  double survival_left(double t) const;

 private:
  std::vector<double> times_;
  std::vector<double> increments_;
  std::vector<double> cumulative_;
};

// Sorted records of one group with their derived risk table and curve.
struct GroupSample {
  std::vector<double> times;  // ascending; events precede censorings at ties
  std::vector<char> events;
  RiskTable table;
  HazardCurve curve;

  std::size_t n() const noexcept { return times.size(); }
  double last_time() const noexcept { return times.empty() ? 0.0 : times.back(); }
  // Y(t): subjects with observed time >= t
  int at_risk(double t) const;
  // N(t): events in [0, t]
  int events_up_to(double t) const;
};

struct TwoSample {
  std::array<GroupSample, 2> groups;

  const GroupSample& operator[](int g) const { return groups.at(static_cast<std::size_t>(g)); }
};

RiskTable build_risk_table(std::span<const SubjectRecord> records, int group);
HazardCurve nelson_aalen(const RiskTable& rt);

GroupSample make_group_sample(std::span<const SubjectRecord> records, int group);
TwoSample make_two_sample(std::span<const SubjectRecord> records);

// min{t in event times : S(t) <= 1 - gamma}; throws QuantileUndefined.
double quantile_estimate(const HazardCurve& hc, double gamma);

// Hazard at an estimated quantile under a locally constant hazard: events in
// a window holding about bandwidth * sqrt(total events) events on each side of
// t_q, divided by the exact person-time inside the window.
double local_hazard(const GroupSample& sample, double t_q, double bandwidth = 2.0);

}  // namespace nphinfer
