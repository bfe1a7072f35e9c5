#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "nphinfer/errors.hpp"
#include "nphinfer/survdata.hpp"

using namespace nphinfer;
using testutil::group;

TEST_CASE("risk table of the three-subject group") {
  const auto r = group({1, 2, 3}, {1, 1, 0}, 0);
  const RiskTable rt = build_risk_table(r, 0);
  CHECK(rt.distinct_times == std::vector<double>{1, 2});
  CHECK(rt.dN == std::vector<int>{1, 1});
  CHECK(rt.Y == std::vector<int>{3, 2});
  CHECK(rt.n_total == 3);
  CHECK(rt.n_censored_between == std::vector<int>{0, 0, 1});
}

TEST_CASE("tied events collapse into one time") {
  const RiskTable rt = build_risk_table(group({1, 1, 2}, {1, 1, 1}, 1), 1);
  CHECK(rt.distinct_times == std::vector<double>{1, 2});
  CHECK(rt.dN == std::vector<int>{2, 1});
  CHECK(rt.Y == std::vector<int>{3, 1});
  CHECK(nelson_aalen(rt).cum_hazard(1.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("censored-only group") {
  const RiskTable rt = build_risk_table(group({5}, {0}, 0), 0);
  CHECK(rt.distinct_times.empty());
  CHECK(rt.n_total == 1);
  const HazardCurve hc = nelson_aalen(rt);
  CHECK(hc.cum_hazard(10.0) == 0.0);
  CHECK(hc.survival(10.0) == 1.0);
}

TEST_CASE("input errors") {
  CHECK_THROWS_AS(build_risk_table(group({1, 2}, {1, 1}, 0), 1), EmptyGroup);
  CHECK_THROWS_AS(build_risk_table(group({-1, 2}, {1, 1}, 0), 0), InvalidRecord);
  std::vector<SubjectRecord> bad{{1.0, true, 2}};
  CHECK_THROWS_AS(build_risk_table(bad, 0), InvalidRecord);
  std::vector<SubjectRecord> nan{{std::nan(""), true, 0}};
  CHECK_THROWS_AS(build_risk_table(nan, 0), InvalidRecord);
}

TEST_CASE("Nelson-Aalen on three subjects") {
  const HazardCurve hc = nelson_aalen(build_risk_table(group({1, 2, 3}, {1, 1, 0}, 0), 0));
  CHECK(std::abs(hc.cum_hazard(1.0) - 1.0 / 3.0) < 1e-10);
  CHECK(std::abs(hc.cum_hazard(2.0) - 5.0 / 6.0) < 1e-10);
  CHECK(std::abs(hc.survival(2.0) - std::exp(-5.0 / 6.0)) < 1e-10);
  CHECK(hc.survival(2.0) == doctest::Approx(0.43460).epsilon(1e-5));
  // left limits
  CHECK(hc.survival_left(2.0) == doctest::Approx(std::exp(-1.0 / 3.0)));
  CHECK(hc.survival_left(0.0) == 1.0);
  CHECK(hc.survival_left(1.5) == hc.survival(1.5));
}

TEST_CASE("censoring at an event time keeps the subject at risk") {
  const RiskTable rt = build_risk_table(group({1, 1, 2}, {1, 0, 1}, 0), 0);
  CHECK(rt.Y == std::vector<int>{3, 1});
  CHECK(rt.n_censored_between == std::vector<int>{0, 1, 0});
}

HazardCurve step_curve() {
  // S: 1 -> 0.6 at t=2 -> 0.3 at t=4
  const double l1 = -std::log(0.6);
  const double l2 = -std::log(0.3) - l1;
  return HazardCurve({2.0, 4.0}, {l1, l2});
}

TEST_CASE("quantiles of a step curve") {
  const HazardCurve hc = step_curve();
  CHECK(quantile_estimate(hc, 0.5) == 4.0);
  CHECK(quantile_estimate(hc, 0.25) == 2.0);
  CHECK_THROWS_AS(quantile_estimate(hc, 0.9), QuantileUndefined);
  CHECK_THROWS_AS(quantile_estimate(hc, 1.0), InvalidArgument);
}

TEST_CASE("local hazard with the whole sample inside the window") {
  // four events, person-time 0.5 + 1 + 1.5 + 2 + 1 = 6
  const auto r = group({0.5, 1.0, 1.5, 2.0, 1.0}, {1, 1, 1, 1, 0}, 0);
  const GroupSample g = make_group_sample(r, 0);
  CHECK(local_hazard(g, 1.0) == doctest::Approx(4.0 / 6.0).epsilon(1e-12));
  CHECK_THROWS_AS(local_hazard(g, 1.2), InvalidArgument);
}

TEST_CASE("local hazard window clipped at zero") {
  std::vector<double> t;
  std::vector<int> e;
  for (int i = 1; i <= 100; ++i) {
    t.push_back(0.01 * i);
    e.push_back(1);
  }
  const GroupSample g = make_group_sample(group(t, e, 0), 0);
  // N(t_q) = 10 < 2 * sqrt(100): t_low = 0, t_up = first time with N >= 30
  const double expected = 30.0 / (0.01 * (30.0 * 31.0 / 2.0) + 0.30 * 70.0);
  CHECK(local_hazard(g, 0.10) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("local hazard recovers a constant hazard") {
  std::mt19937_64 rng(7);
  std::exponential_distribution<double> ex(0.5);
  std::vector<SubjectRecord> r;
  for (int i = 0; i < 10000; ++i) r.push_back({ex(rng), true, 0});
  const GroupSample g = make_group_sample(r, 0);
  const double q = quantile_estimate(g.curve, 0.5);
  CHECK(std::abs(local_hazard(g, q) - 0.5) < 0.05);
}

TEST_CASE("curve properties on random samples") {
  std::mt19937_64 rng(11);
  std::exponential_distribution<double> ex(1.0);
  std::uniform_real_distribution<double> u(0, 3);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<SubjectRecord> r;
    for (int i = 0; i < 60; ++i) {
      const double t = std::round(ex(rng) * 20.0) / 20.0;  // ties on purpose
      const double c = u(rng);
      r.push_back({std::min(t, c), t <= c, 0});
    }
    const GroupSample g = make_group_sample(r, 0);
    const HazardCurve& hc = g.curve;
    double prev = 1.0;
    for (std::size_t j = 0; j < hc.size(); ++j) {
      const double s = hc.survival(hc.times()[j]);
      CHECK(s <= prev);
      CHECK(s > 0.0);
      CHECK(hc.survival_left(hc.times()[j]) >= s);
      prev = s;
    }
    // Y non-increasing, Y >= dN, counts add up
    const RiskTable& rt = g.table;
    int total = 0;
    for (std::size_t j = 0; j < rt.size(); ++j) {
      CHECK(rt.Y[j] >= rt.dN[j]);
      if (j > 0) CHECK(rt.Y[j] <= rt.Y[j - 1]);
      total += rt.dN[j];
    }
    for (int c : rt.n_censored_between) total += c;
    CHECK(total == rt.n_total);

    // quantiles monotone in gamma
    double last_q = 0.0;
    for (double gam : {0.1, 0.2, 0.3, 0.4}) {
      try {
        const double q = quantile_estimate(hc, gam);
        CHECK(q >= last_q);
        last_q = q;
      } catch (const QuantileUndefined&) {
        break;
      }
    }

    // permutation invariance
    std::shuffle(r.begin(), r.end(), rng);
    const GroupSample h = make_group_sample(r, 0);
    CHECK(h.curve.cumulative() == hc.cumulative());
  }
}

TEST_CASE("uncensored survival matches a brute-force pass") {
  std::mt19937_64 rng(3);
  std::exponential_distribution<double> ex(0.7);
  std::vector<SubjectRecord> r;
  for (int i = 0; i < 200; ++i) r.push_back({std::round(ex(rng) * 50.0) / 50.0, true, 1});
  const GroupSample g = make_group_sample(r, 1);
  for (double t : {0.1, 0.5, 1.0, 2.0}) {
    double cum = 0.0;
    std::vector<double> seen;
    for (const auto& a : r) {
      if (a.time > t || std::find(seen.begin(), seen.end(), a.time) != seen.end()) continue;
      seen.push_back(a.time);
      double d = 0, y = 0;
      for (const auto& b : r) {
        d += b.time == a.time;
        y += b.time >= a.time;
      }
      cum += d / y;
    }
    CHECK(g.curve.survival(t) == doctest::Approx(std::exp(-cum)).epsilon(1e-12));
  }
}
