#include "nphinfer/survdata.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "nphinfer/errors.hpp"

namespace nphinfer {

namespace {

void validate(const SubjectRecord& r) {
  if (!std::isfinite(r.time) || r.time < 0.0) {
    throw InvalidRecord("observed time must be finite and non-negative, got " +
                        std::to_string(r.time));
  }
  if (r.group != 0 && r.group != 1) {
    throw InvalidRecord("group must be 0 or 1, got " + std::to_string(r.group));
  }
}

struct SortedGroup {
  std::vector<double> times;
  std::vector<char> events;
};

SortedGroup sorted_group(std::span<const SubjectRecord> records, int group) {
  if (group != 0 && group != 1) throw InvalidArgument("group must be 0 or 1");
  std::vector<std::pair<double, char>> rows;
  for (const auto& r : records) {
    validate(r);
    if (r.group == group) rows.emplace_back(r.time, r.event ? 1 : 0);
  }
  if (rows.empty()) throw EmptyGroup("no records in group " + std::to_string(group));
  // events first at tied times
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.first < b.first || (a.first == b.first && a.second > b.second);
  });
  SortedGroup out;
  out.times.reserve(rows.size());
  out.events.reserve(rows.size());
  for (const auto& [t, e] : rows) {
    out.times.push_back(t);
    out.events.push_back(e);
  }
  return out;
}

RiskTable table_from_sorted(const SortedGroup& g) {
  RiskTable rt;
  const int n = static_cast<int>(g.times.size());
  rt.n_total = n;
  rt.n_censored_between.push_back(0);
  int i = 0;
  while (i < n) {
    const double t = g.times[static_cast<std::size_t>(i)];
    int events = 0;
    int censored = 0;
    int j = i;
    for (; j < n && g.times[static_cast<std::size_t>(j)] == t; ++j) {
      if (g.events[static_cast<std::size_t>(j)]) {
        ++events;
      } else {
        ++censored;
      }
    }
    if (events > 0) {
      rt.distinct_times.push_back(t);
      rt.dN.push_back(events);
      rt.Y.push_back(n - i);
      rt.n_censored_between.push_back(0);
    }
    rt.n_censored_between.back() += censored;
    i = j;
  }
  return rt;
}

}  // namespace

int RiskTable::total_events() const noexcept { return std::accumulate(dN.begin(), dN.end(), 0); }

HazardCurve::HazardCurve(std::vector<double> times, std::vector<double> increments)
    : times_(std::move(times)), increments_(std::move(increments)) {
  if (times_.size() != increments_.size()) {
    throw InvalidArgument("hazard curve needs one increment per time");
  }
  cumulative_.resize(times_.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < times_.size(); ++j) {
    acc += increments_[j];
    cumulative_[j] = acc;
  }
}

double HazardCurve::cum_hazard(double t) const {
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const auto k = static_cast<std::size_t>(it - times_.begin());
  return k == 0 ? 0.0 : cumulative_[k - 1];
}

double HazardCurve::cum_hazard_left(double t) const {
  const auto it = std::lower_bound(times_.begin(), times_.end(), t);
  const auto k = static_cast<std::size_t>(it - times_.begin());
  return k == 0 ? 0.0 : cumulative_[k - 1];
}

double HazardCurve::survival(double t) const { return std::exp(-cum_hazard(t)); }

double HazardCurve::survival_left(double t) const { return std::exp(-cum_hazard_left(t)); }

int GroupSample::at_risk(double t) const {
  const auto it = std::lower_bound(times.begin(), times.end(), t);
  return static_cast<int>(times.end() - it);
}

int GroupSample::events_up_to(double t) const {
  const auto& d = table.distinct_times;
  const auto k = static_cast<std::size_t>(std::upper_bound(d.begin(), d.end(), t) - d.begin());
  return std::accumulate(table.dN.begin(), table.dN.begin() + static_cast<std::ptrdiff_t>(k), 0);
}

RiskTable build_risk_table(std::span<const SubjectRecord> records, int group) {
  return table_from_sorted(sorted_group(records, group));
}

HazardCurve nelson_aalen(const RiskTable& rt) {
  std::vector<double> inc(rt.size());
  for (std::size_t j = 0; j < rt.size(); ++j) {
    inc[j] = static_cast<double>(rt.dN[j]) / static_cast<double>(rt.Y[j]);
  }
  return HazardCurve(rt.distinct_times, std::move(inc));
}

GroupSample make_group_sample(std::span<const SubjectRecord> records, int group) {
  SortedGroup g = sorted_group(records, group);
  GroupSample s;
  s.table = table_from_sorted(g);
  s.curve = nelson_aalen(s.table);
  s.times = std::move(g.times);
  s.events = std::move(g.events);
  return s;
}

TwoSample make_two_sample(std::span<const SubjectRecord> records) {
  return TwoSample{{make_group_sample(records, 0), make_group_sample(records, 1)}};
}

double quantile_estimate(const HazardCurve& hc, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("quantile level must lie in (0, 1)");
  const double target = 1.0 - gamma;
  const auto& cum = hc.cumulative();
  for (std::size_t j = 0; j < cum.size(); ++j) {
    if (std::exp(-cum[j]) <= target) return hc.times()[j];
  }
  throw QuantileUndefined("survival estimate stays above " + std::to_string(target) +
                          " within follow-up");
}

double local_hazard(const GroupSample& sample, double t_q, double bandwidth) {
  if (!(bandwidth > 0.0)) throw InvalidArgument("bandwidth must be positive");
  const auto& d = sample.table.distinct_times;
  const auto pos = std::lower_bound(d.begin(), d.end(), t_q);
  if (pos == d.end() || *pos != t_q) {
    throw InvalidArgument("local hazard must be evaluated at an observed event time");
  }
  std::vector<int> n_cum(d.size());
  std::partial_sum(sample.table.dN.begin(), sample.table.dN.end(), n_cum.begin());

  const double half_width = bandwidth * std::sqrt(static_cast<double>(sample.table.total_events()));
  const double n_q = n_cum[static_cast<std::size_t>(pos - d.begin())];

  double t_low = 0.0;
  double n_low = (d.front() == 0.0) ? n_cum.front() : 0.0;
  double t_up = d.back();
  double n_up = n_cum.back();
  for (std::size_t j = 0; j < d.size(); ++j) {
    if (n_cum[j] <= n_q - half_width) {
      t_low = d[j];
      n_low = n_cum[j];
    }
  }
  for (std::size_t j = 0; j < d.size(); ++j) {
    if (n_cum[j] >= n_q + half_width) {
      t_up = d[j];
      n_up = n_cum[j];
      break;
    }
  }
  double person_time = 0.0;
  for (double x : sample.times) person_time += std::max(0.0, std::min(x, t_up) - t_low);
  const double events = n_up - n_low;
  if (events <= 0.0 || person_time <= 0.0) {
    throw DegenerateHazard("no events inside the local hazard window");
  }
  return events / person_time;
}

}  // namespace nphinfer
