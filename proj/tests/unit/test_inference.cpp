#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "nphinfer/errors.hpp"
#include "nphinfer/inference.hpp"

using namespace nphinfer;

namespace {

TestStatistics stats(std::vector<double> t, Eigen::MatrixXd R, std::vector<Alternative> o = {}) {
  TestStatistics ts;
  ts.T = Eigen::Map<Eigen::VectorXd>(t.data(), static_cast<Eigen::Index>(t.size()));
  ts.se = Eigen::VectorXd::Ones(ts.T.size());
  ts.R = std::move(R);
  ts.orientation = o.empty() ? std::vector<Alternative>(t.size(), Alternative::greater) : o;
  return ts;
}

Eigen::MatrixXd equicorrelated(int m, double rho) {
  Eigen::MatrixXd R = Eigen::MatrixXd::Constant(m, m, rho);
  R.diagonal().setOnes();
  return R;
}

Eigen::MatrixXd random_correlation(int m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Eigen::MatrixXd A(m, m + 2);
  for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = n(rng);
  Eigen::MatrixXd S = A * A.transpose();
  const Eigen::VectorXd d = S.diagonal().cwiseSqrt().cwiseInverse();
  return d.asDiagonal() * S * d.asDiagonal();
}

// every intersection hypothesis evaluated directly on the draws
std::vector<double> brute_closed(const TestStatistics& ts, const MvnDraws& z) {
  const std::size_t m = ts.size();
  std::vector<double> p(m);
  for (std::size_t k = 0; k < m; ++k) p[k] = unadjusted_p(ts.T(static_cast<Eigen::Index>(k)), ts.orientation[k]);
  for (std::size_t s = 1; s < (std::size_t{1} << m); ++s) {
    if ((s & (s - 1)) == 0) continue;
    double tmax = -1e300;
    for (std::size_t k = 0; k < m; ++k) {
      if ((s >> k) & 1U) tmax = std::max(tmax, ts.T(static_cast<Eigen::Index>(k)));
    }
    std::size_t hits = 0;
    for (Eigen::Index d = 0; d < z.Z().cols(); ++d) {
      double zmax = -1e300;
      for (std::size_t k = 0; k < m; ++k) {
        if (!((s >> k) & 1U)) continue;
        const double v = z.Z()(static_cast<Eigen::Index>(k), d);
        zmax = std::max(zmax, ts.orientation[k] == Alternative::two_sided ? std::abs(v) : v);
      }
      hits += zmax >= tmax ? 1 : 0;
    }
    const double ps = static_cast<double>(hits) / static_cast<double>(z.count());
    for (std::size_t k = 0; k < m; ++k) {
      if ((s >> k) & 1U) p[k] = std::max(p[k], ps);
    }
  }
  return p;
}

}  // namespace

TEST_CASE("max tail reference values") {
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  CHECK(std::abs(mvn_max_tail(one, 1.959964, 400000, 3) - 0.025) < 0.001);
  // independent pair: 1 - 0.975^2
  CHECK(std::abs(mvn_max_tail(equicorrelated(2, 0.0), 1.959964, 400000, 3) - 0.049375) < 0.0015);
  // perfectly correlated pair behaves like one statistic
  CHECK(std::abs(mvn_max_tail(Eigen::MatrixXd::Ones(3, 3), 1.959964, 400000, 3) - 0.025) < 0.001);
  CHECK(std::abs(mvn_max_tail(equicorrelated(2, 0.0), 2.241403, 400000, 3, true) - 0.04938) < 0.0015);
}

TEST_CASE("critical values") {
  const auto ts1 = stats({0.0}, Eigen::MatrixXd::Ones(1, 1));
  const MvnDraws z1(ts1.R, 200000, 9);
  CHECK(mvn_critical_value(ts1, z1, 0.025) == doctest::Approx(1.959964).epsilon(1e-6));

  const auto ts2 = stats({0.0, 0.0}, equicorrelated(2, 0.0),
                         {Alternative::two_sided, Alternative::two_sided});
  const MvnDraws z2(ts2.R, 400000, 9);
  // sqrt(0.95) coverage on each independent |Z|
  CHECK(std::abs(mvn_critical_value(ts2, z2, 0.05) - 2.2365) < 0.01);

  for (double rho : {0.0, 0.3, 0.8, 0.99}) {
    const auto ts = stats({0, 0, 0}, equicorrelated(3, rho));
    const MvnDraws z(ts.R, 100000, 4);
    const double q = mvn_critical_value(ts, z, 0.025);
    CHECK(q >= 1.959964 - 1e-9);
    CHECK(q <= 2.39398 + 1e-9);  // Bonferroni root for three components
  }
}

TEST_CASE("p-value ordering") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const int m = 2 + static_cast<int>(seed % 4);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(1.5, 1.0);
    std::vector<double> t(static_cast<std::size_t>(m));
    for (auto& x : t) x = n(rng);
    const auto ts = stats(t, random_correlation(m, seed));
    const MvnDraws z(ts.R, 20000, seed);
    const auto ss = single_step(ts, z);
    const auto ct = closed_test(ts, z);
    const auto holm = holm_adjust([&] {
      std::vector<double> p;
      for (double x : t) p.push_back(unadjusted_p(x, Alternative::greater));
      return p;
    }());
    for (int k = 0; k < m; ++k) {
      const double pu = unadjusted_p(t[static_cast<std::size_t>(k)], Alternative::greater);
      CHECK(pu <= ct[static_cast<std::size_t>(k)] + 1e-15);
      CHECK(ct[static_cast<std::size_t>(k)] <= ss.p[static_cast<std::size_t>(k)] + 1e-15);
      CHECK(ct[static_cast<std::size_t>(k)] <= holm[static_cast<std::size_t>(k)] + 0.01);
      CHECK(ss.p[static_cast<std::size_t>(k)] <= std::min(1.0, m * pu) + 0.01);
      CHECK(ss.p_global <= ss.p[static_cast<std::size_t>(k)] + 1e-15);
    }
  }
}

TEST_CASE("closed test matches direct enumeration") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const int m = 2 + static_cast<int>(seed % 3);
    std::mt19937_64 rng(seed + 100);
    std::normal_distribution<double> n(1.8, 0.8);
    std::vector<double> t(static_cast<std::size_t>(m));
    for (auto& x : t) x = n(rng);
    if (seed == 1) t[1] = t[0];  // tied statistics
    std::vector<Alternative> o(static_cast<std::size_t>(m), Alternative::greater);
    if (seed % 2 == 0) o[0] = Alternative::two_sided;
    const auto ts = stats(t, random_correlation(m, seed), o);
    const MvnDraws z(ts.R, 6000, seed);
    CHECK(closed_test(ts, z) == brute_closed(ts, z));
  }
}

TEST_CASE("closed test size limit") {
  const auto ts = stats(std::vector<double>(16, 1.0), equicorrelated(16, 0.2));
  CHECK_THROWS_AS(closed_test(ts, 100, 1), TooManyParameters);
  const auto ts15 = stats(std::vector<double>(15, 1.0), equicorrelated(15, 0.2));
  CHECK(closed_test(ts15, 500, 1).size() == 15);
}

TEST_CASE("correlation repair") {
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 1.5, 1.5, 1.0;
  CHECK_THROWS_AS(repair_correlation(bad), InvalidCorrelation);
  Eigen::MatrixXd near(3, 3);
  near << 1.0, 1.0, 1.0, 1.0, 1.0, 1.0 + 1e-8, 1.0, 1.0 + 1e-8, 1.0;
  const Eigen::MatrixXd fixed = repair_correlation(near);
  CHECK(fixed.diagonal().isOnes());
  const Eigen::MatrixXd F = correlation_factor(fixed);
  CHECK((F * F.transpose() - fixed).cwiseAbs().maxCoeff() < 1e-6);
  Eigen::MatrixXd nan = Eigen::MatrixXd::Identity(2, 2);
  nan(0, 1) = std::nan("");
  CHECK_THROWS_AS(repair_correlation(nan), InvalidCorrelation);
}

TEST_CASE("draws follow the requested correlation") {
  const Eigen::MatrixXd R = random_correlation(4, 3);
  const MvnDraws z(R, 200000, 5);
  const Eigen::MatrixXd C = z.Z() * z.Z().transpose() / static_cast<double>(z.count());
  CHECK((C - R).cwiseAbs().maxCoeff() < 0.01);
  // antithetic pairs: exact zero mean
  CHECK(z.Z().rowwise().sum().cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("draws are reproducible and thread independent") {
  const Eigen::MatrixXd R = random_correlation(3, 1);
  const MvnDraws a(R, 50000, 11);
  const MvnDraws b(R, 50000, 11);
  CHECK(a.Z() == b.Z());
  const MvnDraws c(R, 50000, 12);
  CHECK(a.Z() != c.Z());
}

TEST_CASE("Holm") {
  const auto h = holm_adjust({0.01, 0.04, 0.03, 0.5});
  CHECK(h[0] == doctest::Approx(0.04));
  CHECK(h[2] == doctest::Approx(0.09));
  CHECK(h[1] == doctest::Approx(0.09));
  CHECK(h[3] == doctest::Approx(0.5));
}

TEST_CASE("oriented correlation flips less-sided components") {
  EstimateVector ev;
  ev.specs = {parse_spec("S:1:greater"), parse_spec("score:2:less")};
  ev.estimates.resize(2);
  ev.estimates[0].theta = 0.1;
  ev.estimates[1].theta = -3.0;
  CovarianceMatrix cov;
  cov.sigma.resize(2, 2);
  cov.sigma << 0.01, -0.08, -0.08, 1.0;
  const auto one = make_test_statistics(ev, cov, Sided::one);
  CHECK(one.T(0) == doctest::Approx(1.0));
  CHECK(one.T(1) == doctest::Approx(3.0));
  CHECK(one.R(0, 1) == doctest::Approx(0.8));
  const auto two = make_test_statistics(ev, cov, Sided::two);
  CHECK(two.T(1) == doctest::Approx(3.0));
  CHECK(two.R(0, 1) == doctest::Approx(-0.8));
  CHECK(two.orientation[0] == Alternative::two_sided);
}

TEST_CASE("intervals") {
  EstimateVector ev;
  ev.specs = {parse_spec("S:1"), parse_spec("avgHR:2:less")};
  ev.estimates.resize(2);
  ev.estimates[0].theta = 0.1;
  ev.estimates[1].theta = std::log(0.7);
  CovarianceMatrix cov;
  cov.sigma = Eigen::MatrixXd::Identity(2, 2) * 0.0025;
  InferenceOptions opts;
  opts.draws = 100000;
  const auto rep = infer(ev, cov, opts);
  const auto& u = rep.ci_unadjusted.analysis;
  CHECK(u[0].lower == doctest::Approx(0.1 - 1.959964 * 0.05));
  CHECK(u[0].upper == doctest::Approx(0.1 + 1.959964 * 0.05));
  CHECK(rep.ci_unadjusted.report[1].upper == doctest::Approx(std::exp(std::log(0.7) + 1.959964 * 0.05)));
  CHECK(rep.ci_bonferroni.critical[0] == doctest::Approx(2.241403).epsilon(1e-5));
  CHECK(rep.ci_mvn.critical[0] < rep.ci_bonferroni.critical[0] + 1e-12);
  CHECK(rep.ci_mvn.critical[0] > 1.959964);

  opts.sided = Sided::one;
  const auto one = infer(ev, cov, opts);
  CHECK(std::isinf(one.ci_mvn.analysis[0].upper));
  CHECK(std::isinf(one.ci_mvn.analysis[1].lower));
  CHECK(one.ci_mvn.report[1].lower == 0.0);
  CHECK(one.p_unadjusted[1] == doctest::Approx(0.5 * std::erfc(-std::log(0.7) / 0.05 / std::sqrt(2.0))));
}

TEST_CASE("inference is deterministic for a fixed seed") {
  EstimateVector ev;
  ev.specs = {parse_spec("S:1"), parse_spec("RMST:2"), parse_spec("score:2:less")};
  ev.estimates.resize(3);
  ev.estimates[0].theta = 0.08;
  ev.estimates[1].theta = 0.1;
  ev.estimates[2].theta = -4.0;
  CovarianceMatrix cov;
  cov.sigma.resize(3, 3);
  cov.sigma << 0.0016, 0.0015, -0.03, 0.0015, 0.0036, -0.04, -0.03, -0.04, 4.0;
  InferenceOptions opts;
  opts.draws = 30000;
  opts.sided = Sided::one;
  const auto a = infer(ev, cov, opts);
  const auto b = infer(ev, cov, opts);
  CHECK(a.p_closed == b.p_closed);
  CHECK(a.p_single_step == b.p_single_step);
  CHECK(a.ci_mvn.critical == b.ci_mvn.critical);
}
