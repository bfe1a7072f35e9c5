#include <cmath>
#include <variant>

#include "doctest.h"
#include "nphinfer/errors.hpp"
#include "nphinfer/simulate.hpp"

using namespace nphinfer;

namespace {

double truth(int scenario, const char* spec) { return true_value(scenario_preset(scenario), parse_spec(spec)); }

}  // namespace

TEST_CASE("presets") {
  const auto s4 = scenario_preset(4);
  CHECK(std::get<ExponentialLaw>(s4.arms[0]).rate == doctest::Approx(0.5));
  CHECK(std::get<ExponentialLaw>(s4.arms[1]).rate == doctest::Approx(0.325));
  CHECK(s4.recruit_years == 1.0);
  const auto s5 = scenario_preset(5);
  const auto& c = std::get<MultiStateLaw>(s5.arms[0]);
  CHECK(c.death_pre == doctest::Approx(0.6931).epsilon(1e-4));
  CHECK(c.death_post == doctest::Approx(2.7726).epsilon(1e-4));
  CHECK(c.progression == doctest::Approx(1.3863).epsilon(1e-4));
  CHECK(c.switch_probability == 0.7);
  CHECK(std::get<MultiStateLaw>(s5.arms[1]).cure_fraction == 0.3);
  CHECK(scenario_preset(3).recruit_years == 2.0);
  CHECK(scenario_preset(1).recruit_years == 1.5);
  CHECK(scenario_preset(2).max_followup_years == 3.5);
  CHECK_THROWS_AS(scenario_preset(0), UnknownScenario);
  CHECK_THROWS_AS(scenario_preset(7), UnknownScenario);
  for (int id = 1; id <= 7; ++id) CHECK(parameter_set(id).front().arg > 0.0);
  CHECK_THROWS_AS(parameter_set(8), InvalidArgument);
}

TEST_CASE("law survival and density agree") {
  for (int id = 1; id <= 6; ++id) {
    for (const auto& law : scenario_preset(id).arms) {
      CAPTURE(describe(law));
      CHECK(law_survival(law, 0.0) == doctest::Approx(1.0));
      for (double t : {0.3, 1.0, 2.2}) {
        const double h = 1e-5;
        const double numeric = (law_survival(law, t - h) - law_survival(law, t + h)) / (2 * h);
        CHECK(law_density(law, t) == doctest::Approx(numeric).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("sampled laws match their survival functions") {
  std::mt19937_64 rng(17);
  for (int id = 1; id <= 6; ++id) {
    for (const auto& law : scenario_preset(id).arms) {
      CAPTURE(describe(law));
      const int n = 100000;
      int alive1 = 0, alive2 = 0;
      for (int i = 0; i < n; ++i) {
        const double t = law_sample(law, rng);
        alive1 += t > 1.0;
        alive2 += t > 2.0;
      }
      CHECK(std::abs(alive1 / double(n) - law_survival(law, 1.0)) < 0.006);
      CHECK(std::abs(alive2 / double(n) - law_survival(law, 2.0)) < 0.006);
    }
  }
}

TEST_CASE("true values") {
  CHECK(truth(4, "S:1") == doctest::Approx(0.1160).epsilon(1e-3));
  CHECK(truth(4, "S:2") == doctest::Approx(0.1542).epsilon(1e-3));
  CHECK(truth(4, "RMST:3") == doctest::Approx(0.3626).epsilon(1e-3));
  CHECK(std::exp(truth(4, "cloglogS:2")) == doctest::Approx(0.65));
  CHECK(std::exp(truth(4, "avgHR:3")) == doctest::Approx(0.65));
  CHECK(truth(4, "Q:0.25") == doctest::Approx(0.3098).epsilon(1e-3));
  CHECK(truth(4, "logS:3") == doctest::Approx(0.525));
  CHECK(std::isnan(truth(4, "score:3")));
  CHECK(true_value(null_variant(scenario_preset(4)), parse_spec("score:3")) == 0.0);
  CHECK(true_value(null_variant(scenario_preset(2)), parse_spec("HR:3")) == 0.0);

  CHECK(std::abs(truth(1, "S:1")) < 0.005);
  CHECK(std::abs(truth(1, "S:2") - 0.160) < 0.002);
  CHECK(std::abs(truth(1, "RMST:3") - 0.261) < 0.002);
  CHECK(std::abs(std::exp(truth(1, "avgHR:3")) - 0.670) < 0.002);
  CHECK(std::abs(truth(1, "Q:0.25") - 0.103) < 0.002);

  CHECK(std::abs(truth(2, "S:1") + 0.058) < 0.002);
  CHECK(std::abs(std::exp(truth(2, "avgHR:3")) - 0.747) < 0.002);
  CHECK(std::abs(truth(2, "Q:0.25") + 0.264) < 0.002);
  CHECK(std::abs(truth(2, "RMST:3") - 0.200) < 0.002);

  CHECK(std::abs(truth(6, "S:1") - 0.166) < 0.002);
  CHECK(std::abs(truth(6, "RMST:3") - 0.400) < 0.002);
  CHECK(std::abs(std::exp(truth(6, "avgHR:3")) - 0.6175) < 0.002);
}

TEST_CASE("censoring and rounding") {
  ScenarioConfig cfg = scenario_preset(4);
  cfg.arms = {ExponentialLaw{1e-9}, ExponentialLaw{1e-9}};
  const auto r = simulate_trial(cfg, 50000, 3);
  int early = 0;
  for (const auto& x : r) {
    CHECK(x.time >= 1.0 / 365.25 - 1e-12);
    early += !x.event && x.time <= 1.0;
    const double days = x.time * 365.25;
    CHECK(std::abs(days - std::round(days)) < 1e-6);
  }
  CHECK(std::abs(early / double(r.size()) - 0.1) < 0.01);
}

TEST_CASE("complete cure gives no events") {
  ScenarioConfig cfg = scenario_preset(5);
  cfg.arms[1] = MultiStateLaw{1.0, 1.0, 1.0, 1.0, 0.0, 0.0};
  for (const auto& x : simulate_trial(cfg, 500, 1)) {
    if (x.group == 1) CHECK_FALSE(x.event);
  }
}

TEST_CASE("trials are reproducible") {
  const auto cfg = scenario_preset(2);
  const auto a = simulate_trial(cfg, 100, 5);
  const auto b = simulate_trial(cfg, 100, 5);
  REQUIRE(a.size() == 200);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].time == b[i].time);
  CHECK(simulate_trial(cfg, 100, 6)[0].time != a[0].time);
  CHECK_THROWS_AS(simulate_trial(cfg, 0, 1), InvalidArgument);
}

TEST_CASE("invalid configurations") {
  ScenarioConfig cfg = scenario_preset(4);
  cfg.arms[0] = ExponentialLaw{-1.0};
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = scenario_preset(4);
  cfg.recruit_years = 4.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("study summaries") {
  StudyOptions opts;
  opts.mvn_draws = 2000;
  const auto specs = parameter_set(7);
  const auto one = run_study(scenario_preset(4), specs, 100, 1, 1, opts);
  REQUIRE(one.n_used == 1);
  for (const auto& s : one.specs) {
    CHECK((s.reject_unadjusted == 0.0 || s.reject_unadjusted == 1.0));
    // no population value for the score outside the null
    if (std::isnan(s.truth)) continue;
    CHECK((s.coverage_adjusted == 0.0 || s.coverage_adjusted == 1.0));
  }

  const auto sum = run_study(scenario_preset(4), specs, 150, 60, 2, opts);
  CHECK(sum.n_used + sum.n_excluded == 60);
  for (const auto& s : sum.specs) {
    CHECK(s.reject_closed <= s.reject_unadjusted);
    CHECK(s.reject_single_step <= s.reject_closed);
    if (!std::isnan(s.truth)) CHECK(s.coverage_adjusted >= s.coverage_unadjusted);
  }
  CHECK(sum.any_closed >= sum.any_holm);
  CHECK(sum.any_unadjusted >= sum.any_closed);
  CHECK(sum.simultaneous_coverage_adjusted >= sum.simultaneous_coverage_unadjusted);

  opts.threads = 1;
  const auto a = run_study(scenario_preset(2), parameter_set(5), 80, 8, 9, opts);
  opts.threads = 3;
  const auto b = run_study(scenario_preset(2), parameter_set(5), 80, 8, 9, opts);
  CHECK(a.estimates == b.estimates);
  CHECK(a.specs[0].reject_closed == b.specs[0].reject_closed);
}

TEST_CASE("replicate data matches the study stream") {
  StudyOptions opts;
  opts.mvn_draws = 1000;
  const std::vector<ParameterSpec> specs{parse_spec("S:1")};
  const auto sum = run_study(scenario_preset(4), specs, 60, 3, 4, opts);
  const auto data = make_two_sample(study_replicate_data(scenario_preset(4), 60, 4, 2));
  CHECK(sum.estimates[2][0] == estimate(data, specs[0]).theta);
}

TEST_CASE("failed replications are categorised") {
  StudyOptions opts;
  opts.mvn_draws = 1000;
  // survival in the tiny sample rarely reaches 0.05
  const std::vector<ParameterSpec> specs{parse_spec("Q:0.95")};
  const auto sum = run_study(scenario_preset(4), specs, 10, 20, 1, opts);
  CHECK(sum.n_excluded > 0);
  CHECK(sum.exclusions.count("QuantileUndefined") == 1);
}
