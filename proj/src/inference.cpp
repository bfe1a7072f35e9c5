#include "nphinfer/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "nphinfer/errors.hpp"
#include "nphinfer/parallel.hpp"

namespace nphinfer {

namespace {

constexpr std::size_t kPairsPerBlock = 8192;
constexpr double kClipTolerance = 1e-6;
const boost::math::normal kStdNormal;

double upper_tail(double x) { return boost::math::cdf(boost::math::complement(kStdNormal, x)); }

double upper_quantile(double p) { return boost::math::quantile(boost::math::complement(kStdNormal, p)); }

// P{Zo >= c} for one oriented null coordinate
double component_tail(double c, Alternative o) {
  if (o != Alternative::two_sided) return upper_tail(c);
  return c <= 0.0 ? 1.0 : 2.0 * upper_tail(c);
}

double component_quantile(double alpha, Alternative o) {
  return o == Alternative::two_sided ? upper_quantile(alpha / 2.0) : upper_quantile(alpha);
}

double oriented(double z, Alternative o) { return o == Alternative::two_sided ? std::abs(z) : z; }

std::vector<double> draw_maxima(const TestStatistics& ts, const MvnDraws& z) {
  const auto m = static_cast<Eigen::Index>(ts.size());
  std::vector<double> out(z.count());
  for (std::size_t d = 0; d < z.count(); ++d) {
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < m; ++k) {
      best = std::max(best, oriented(z.Z()(k, static_cast<Eigen::Index>(d)), ts.orientation[static_cast<std::size_t>(k)]));
    }
    out[d] = best;
  }
  std::sort(out.begin(), out.end());
  return out;
}

double tail_fraction(const std::vector<double>& sorted, double c) {
  const auto it = std::lower_bound(sorted.begin(), sorted.end(), c);
  return static_cast<double>(sorted.end() - it) / static_cast<double>(sorted.size());
}

void check_draws(const TestStatistics& ts, const MvnDraws& z) {
  if (z.dim() != ts.size()) throw InvalidArgument("draw dimension does not match the statistics");
  if (z.count() == 0) throw InvalidArgument("no multivariate normal draws");
}

}  // namespace

Sided parse_sided(std::string_view name) {
  if (name == "one" || name == "one_sided" || name == "one.sided") return Sided::one;
  if (name == "two" || name == "two_sided" || name == "two.sided") return Sided::two;
  throw InvalidArgument("sided must be 'one' or 'two', got '" + std::string(name) + "'");
}

std::string_view sided_name(Sided s) { return s == Sided::one ? "one" : "two"; }

Eigen::MatrixXd repair_correlation(const Eigen::MatrixXd& R) {
  if (R.rows() != R.cols() || R.rows() == 0) throw InvalidCorrelation("correlation matrix must be square");
  if (!R.allFinite()) throw InvalidCorrelation("correlation matrix has non-finite entries");
  const Eigen::MatrixXd sym = 0.5 * (R + R.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw InvalidCorrelation("eigendecomposition failed");
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig < -kClipTolerance) {
    throw InvalidCorrelation("correlation matrix is not positive semi-definite (eigenvalue " +
                             std::to_string(min_eig) + ")");
  }
  Eigen::MatrixXd out = sym;
  if (min_eig < 0.0) {
    const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
    out = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
  }
  const Eigen::VectorXd d = out.diagonal().cwiseMax(std::numeric_limits<double>::min()).cwiseSqrt().cwiseInverse();
  out = d.asDiagonal() * out * d.asDiagonal();
  out.diagonal().setOnes();
  return out;
}

Eigen::MatrixXd correlation_from_covariance(const Eigen::MatrixXd& sigma) {
  if (!sigma.allFinite()) throw InvalidCorrelation("covariance matrix has non-finite entries");
  const Eigen::VectorXd d = sigma.diagonal();
  if ((d.array() <= 0.0).any()) throw InvalidCorrelation("covariance matrix has a non-positive diagonal");
  const Eigen::VectorXd inv = d.cwiseSqrt().cwiseInverse();
  return repair_correlation(inv.asDiagonal() * sigma * inv.asDiagonal());
}

Eigen::MatrixXd correlation_factor(const Eigen::MatrixXd& R) {
  Eigen::LLT<Eigen::MatrixXd> llt(R);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  const Eigen::MatrixXd jittered = R + 1e-10 * Eigen::MatrixXd::Identity(R.rows(), R.cols());
  llt.compute(jittered);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(R);
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

TestStatistics make_test_statistics(const EstimateVector& ev, const CovarianceMatrix& cov, Sided sided) {
  const auto m = static_cast<Eigen::Index>(ev.size());
  if (cov.sigma.rows() != m || cov.sigma.cols() != m) {
    throw InvalidArgument("covariance dimension does not match the estimate vector");
  }
  TestStatistics ts;
  ts.T.resize(m);
  ts.se = cov.sigma.diagonal().cwiseSqrt();
  ts.R = correlation_from_covariance(cov.sigma);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto& spec = ev.specs[static_cast<std::size_t>(k)];
    const Alternative o = sided == Sided::two ? Alternative::two_sided : spec.alternative;
    const double t = (ev.estimates[static_cast<std::size_t>(k)].theta - spec.null_value) / ts.se(k);
    ts.T(k) = o == Alternative::greater ? t : (o == Alternative::less ? -t : std::abs(t));
    ts.orientation.push_back(o);
  }
  // correlation of the oriented statistics
  for (Eigen::Index k = 0; k < m; ++k) {
    if (ts.orientation[static_cast<std::size_t>(k)] != Alternative::less) continue;
    ts.R.row(k) *= -1.0;
    ts.R.col(k) *= -1.0;
  }
  return ts;
}

MvnDraws::MvnDraws(const Eigen::MatrixXd& R, std::size_t draws, std::uint64_t seed) {
  if (draws == 0) throw InvalidArgument("number of draws must be positive");
  const Eigen::MatrixXd F = correlation_factor(repair_correlation(R));
  const Eigen::Index m = F.rows();
  const std::size_t pairs = (draws + 1) / 2;
  Z_.resize(m, static_cast<Eigen::Index>(2 * pairs));
  const std::size_t blocks = (pairs + kPairsPerBlock - 1) / kPairsPerBlock;
  parallel_for(blocks, [&](std::size_t b) {
    std::mt19937_64 rng = substream(seed, b);
    std::normal_distribution<double> norm;
    Eigen::VectorXd u(m);
    const std::size_t end = std::min(pairs, (b + 1) * kPairsPerBlock);
    for (std::size_t p = b * kPairsPerBlock; p < end; ++p) {
      for (Eigen::Index k = 0; k < m; ++k) u(k) = norm(rng);
      const Eigen::VectorXd x = F * u;
      Z_.col(static_cast<Eigen::Index>(2 * p)) = x;
      Z_.col(static_cast<Eigen::Index>(2 * p + 1)) = -x;
    }
  });
}

double mvn_max_tail(const Eigen::MatrixXd& R, double c, std::size_t draws, std::uint64_t seed, bool two_sided) {
  const MvnDraws z(R, draws, seed);
  std::size_t hits = 0;
  for (Eigen::Index d = 0; d < z.Z().cols(); ++d) {
    const double mx = two_sided ? z.Z().col(d).cwiseAbs().maxCoeff() : z.Z().col(d).maxCoeff();
    hits += mx >= c ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(z.count());
}

double unadjusted_p(double t, Alternative orientation) { return component_tail(t, orientation); }

SingleStepResult single_step(const TestStatistics& ts, const MvnDraws& z) {
  check_draws(ts, z);
  const std::vector<double> maxima = draw_maxima(ts, z);
  SingleStepResult out;
  double t_max = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const double t = ts.T(static_cast<Eigen::Index>(k));
    t_max = std::max(t_max, t);
    const double exact = unadjusted_p(t, ts.orientation[k]);
    // one component: the max is the statistic itself, use the exact tail
    out.p.push_back(ts.size() == 1 ? exact : std::max(tail_fraction(maxima, t), exact));
  }
  out.p_global = ts.size() == 1 ? out.p[0] : tail_fraction(maxima, t_max);
  return out;
}

SingleStepResult single_step(const TestStatistics& ts, std::size_t draws, std::uint64_t seed) {
  return single_step(ts, MvnDraws(ts.R, draws, seed));
}

std::vector<double> closed_test(const TestStatistics& ts, const MvnDraws& z) {
  check_draws(ts, z);
  const std::size_t m = ts.size();
  if (m > kMaxClosedTestParameters) {
    throw TooManyParameters("closed test supports at most 15 parameters; use the single-step test");
  }
  const std::size_t full = (std::size_t{1} << m) - 1;

  // levels in decreasing order of T; the largest statistic in a subset I is
  // at the first member of I in this order
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ts.T(static_cast<Eigen::Index>(a)) > ts.T(static_cast<Eigen::Index>(b));
  });

  // hist[j][mask]: draws whose exceedance set {k : Zo_k >= T_order[j]} is mask
  std::vector<std::vector<std::uint64_t>> hist(m, std::vector<std::uint64_t>(full + 1, 0));
  std::vector<double> zo(m);
  for (Eigen::Index d = 0; d < z.Z().cols(); ++d) {
    for (std::size_t k = 0; k < m; ++k) zo[k] = oriented(z.Z()(static_cast<Eigen::Index>(k), d), ts.orientation[k]);
    for (std::size_t j = 0; j < m; ++j) {
      const double c = ts.T(static_cast<Eigen::Index>(order[j]));
      std::size_t mask = 0;
      for (std::size_t k = 0; k < m; ++k) {
        if (zo[k] >= c) mask |= std::size_t{1} << k;
      }
      ++hist[j][mask];
    }
  }
  // subset sums: hist[j][S] becomes the number of draws with exceedance set inside S
  for (auto& h : hist) {
    for (std::size_t bit = 0; bit < m; ++bit) {
      for (std::size_t s = 0; s <= full; ++s) {
        if (s & (std::size_t{1} << bit)) h[s] += h[s ^ (std::size_t{1} << bit)];
      }
    }
  }
  std::vector<std::size_t> rank(m);
  for (std::size_t j = 0; j < m; ++j) rank[order[j]] = j;

  const double n = static_cast<double>(z.count());
  std::vector<double> p(m);
  for (std::size_t k = 0; k < m; ++k) p[k] = unadjusted_p(ts.T(static_cast<Eigen::Index>(k)), ts.orientation[k]);
  for (std::size_t subset = 1; subset <= full; ++subset) {
    if ((subset & (subset - 1)) == 0) continue;  // singletons use the exact tail
    std::size_t lead = m;
    for (std::size_t k = 0; k < m; ++k) {
      if ((subset >> k) & 1U) lead = std::min(lead, rank[k]);
    }
    const double p_subset = (n - static_cast<double>(hist[lead][full ^ subset])) / n;
    for (std::size_t k = 0; k < m; ++k) {
      if ((subset >> k) & 1U) p[k] = std::max(p[k], p_subset);
    }
  }
  return p;
}

std::vector<double> closed_test(const TestStatistics& ts, std::size_t draws, std::uint64_t seed) {
  if (ts.size() > kMaxClosedTestParameters) {
    throw TooManyParameters("closed test supports at most 15 parameters; use the single-step test");
  }
  return closed_test(ts, MvnDraws(ts.R, draws, seed));
}

std::vector<double> holm_adjust(const std::vector<double>& p) {
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<double> out(m);
  double running = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    running = std::max(running, std::min(1.0, static_cast<double>(m - r) * p[order[r]]));
    out[order[r]] = running;
  }
  return out;
}

double mvn_critical_value(const TestStatistics& ts, const MvnDraws& z, double alpha) {
  check_draws(ts, z);
  if (!(alpha > 0.0 && alpha <= 0.5)) throw InvalidArgument("alpha must lie in (0, 0.5]");
  const std::vector<double> maxima = draw_maxima(ts, z);

  // the true root lies between the largest marginal quantile and the Bonferroni bound
  double lower = 0.0;
  for (auto o : ts.orientation) lower = std::max(lower, component_quantile(alpha, o));
  auto bonferroni_tail = [&](double q) {
    double s = 0.0;
    for (auto o : ts.orientation) s += component_tail(q, o);
    return s;
  };
  double b_lo = lower;
  double b_hi = lower + 10.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (b_lo + b_hi);
    (bonferroni_tail(mid) > alpha ? b_lo : b_hi) = mid;
  }
  const double upper = b_hi;

  double lo = 0.0;
  double hi = std::max(maxima.back(), upper) + 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (tail_fraction(maxima, mid) > alpha ? lo : hi) = mid;
  }
  return std::clamp(hi, lower, upper);
}

CiResult simultaneous_ci(const TestStatistics& ts, const EstimateVector& ev, double alpha, CiMethod method,
                         const MvnDraws* z) {
  if (!(alpha > 0.0 && alpha <= 0.5)) throw InvalidArgument("alpha must lie in (0, 0.5]");
  const std::size_t m = ts.size();
  CiResult ci;
  ci.method = method;
  ci.level = 1.0 - alpha;
  double q_mvn = 0.0;
  if (method == CiMethod::mvn) {
    if (z == nullptr) throw InvalidArgument("MVN intervals need a draw matrix");
    q_mvn = mvn_critical_value(ts, *z, alpha);
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < m; ++k) {
    const Alternative o = ts.orientation[k];
    double q = q_mvn;
    if (method == CiMethod::unadjusted) q = component_quantile(alpha, o);
    if (method == CiMethod::bonferroni) q = component_quantile(alpha / static_cast<double>(m), o);
    ci.critical.push_back(q);
    const double theta = ev.estimates[k].theta;
    const double half = q * ts.se(static_cast<Eigen::Index>(k));
    Interval a{theta - half, theta + half};
    if (o == Alternative::greater) a.upper = inf;
    if (o == Alternative::less) a.lower = -inf;
    ci.analysis.push_back(a);
    const ParamKind kind = ev.specs[k].kind;
    ci.report.push_back({to_report_scale(kind, a.lower), to_report_scale(kind, a.upper)});
  }
  return ci;
}

InferenceReport infer(const EstimateVector& ev, const CovarianceMatrix& cov, const InferenceOptions& opts) {
  if (!(opts.alpha > 0.0 && opts.alpha <= 0.5)) throw InvalidArgument("alpha must lie in (0, 0.5]");
  InferenceReport rep;
  rep.alpha = opts.alpha;
  rep.mvn_draws = opts.draws;
  rep.seed = opts.seed;
  rep.stats = make_test_statistics(ev, cov, opts.sided);
  const MvnDraws z(rep.stats.R, opts.draws, opts.seed);

  for (std::size_t k = 0; k < ev.size(); ++k) {
    rep.p_unadjusted.push_back(unadjusted_p(rep.stats.T(static_cast<Eigen::Index>(k)), rep.stats.orientation[k]));
  }
  const SingleStepResult ss = single_step(rep.stats, z);
  rep.p_single_step = ss.p;
  rep.p_global = ss.p_global;
  if (opts.closed_test) {
    rep.p_closed = closed_test(rep.stats, z);
    for (std::size_t k = 0; k < ev.size(); ++k) {
      rep.p_single_step[k] = std::max(rep.p_single_step[k], rep.p_closed[k]);
    }
  }
  rep.p_holm = holm_adjust(rep.p_unadjusted);
  rep.ci_mvn = simultaneous_ci(rep.stats, ev, opts.alpha, CiMethod::mvn, &z);
  rep.ci_bonferroni = simultaneous_ci(rep.stats, ev, opts.alpha, CiMethod::bonferroni);
  rep.ci_unadjusted = simultaneous_ci(rep.stats, ev, opts.alpha, CiMethod::unadjusted);
  return rep;
}

}  // namespace nphinfer
