#include "nphinfer/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>
#include <sstream>

#include <boost/math/distributions/lognormal.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>

#include "nphinfer/errors.hpp"
#include "nphinfer/inference.hpp"
#include "nphinfer/parallel.hpp"

namespace nphinfer {

namespace {

constexpr double kDay = 1.0 / 365.25;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// int_0^t e^{-a u} e^{-r (t - u)} du
double conv(double a, double r, double t) {
  if (std::abs(a - r) < 1e-12) return t * std::exp(-a * t);
  return (std::exp(-r * t) - std::exp(-a * t)) / (a - r);
}

double conv_dt(double a, double r, double t) {
  if (std::abs(a - r) < 1e-12) return (1.0 - a * t) * std::exp(-a * t);
  return (a * std::exp(-a * t) - r * std::exp(-r * t)) / (a - r);
}

double exp_draw(double rate, std::mt19937_64& rng) {
  std::exponential_distribution<double> d(rate);
  return d(rng);
}

double uniform(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng);
}

bool positive(double v) { return std::isfinite(v) && v > 0.0; }
bool probability(double v) { return v >= 0.0 && v <= 1.0; }

template <class F>
double integrate(F f, double lo, double hi) {
  boost::math::quadrature::tanh_sinh<double> integrator;
  if (hi <= lo) return 0.0;
  return integrator.integrate([&](double t) { return f(t); }, lo, hi);
}

double law_quantile(const ArmModel& law, double gamma) {
  const double target = 1.0 - gamma;
  double hi = 1.0;
  while (law_survival(law, hi) > target) {
    hi *= 2.0;
    if (hi > 1e4) throw QuantileUndefined("survival never drops to " + std::to_string(target));
  }
  auto f = [&](double t) { return law_survival(law, t) - target; };
  boost::math::tools::eps_tolerance<double> tol(50);
  std::uintmax_t iters = 200;
  const auto [a, b] = boost::math::tools::bisect(f, 0.0, hi, tol, iters);
  return 0.5 * (a + b);
}

std::string category(const std::exception_ptr& ep) {
  try {
    std::rethrow_exception(ep);
  } catch (const QuantileUndefined&) {
    return "QuantileUndefined";
  } catch (const DegenerateHazard&) {
    return "DegenerateHazard";
  } catch (const HorizonBeyondData&) {
    return "HorizonBeyondData";
  } catch (const DegenerateTransform&) {
    return "DegenerateTransform";
  } catch (const NonconvergentFit&) {
    return "NonconvergentFit";
  } catch (const DegenerateVariance&) {
    return "DegenerateVariance";
  } catch (const PerturbationFailure&) {
    return "PerturbationFailure";
  } catch (const InvalidCorrelation&) {
    return "InvalidCorrelation";
  } catch (const EmptyGroup&) {
    return "EmptyGroup";
  } catch (const Error& e) {
    return e.what();
  }
}

struct RepOutcome {
  bool ok = false;
  std::string failure;
  std::vector<double> theta;
  std::vector<char> cov_unadj, cov_adj, cov_bonf;
  std::vector<char> rej_unadj, rej_closed, rej_single, rej_holm;
};

}  // namespace

double law_survival(const ArmModel& law, double t) {
  if (t <= 0.0) return 1.0;
  return std::visit(
      overloaded{
          [&](const LogNormalLaw& l) {
            return boost::math::cdf(boost::math::complement(boost::math::lognormal(l.meanlog, l.sdlog), t));
          },
          [&](const WeibullLaw& w) { return std::exp(-std::pow(t / w.scale, w.shape)); },
          [&](const ExponentialLaw& e) { return std::exp(-e.rate * t); },
          [&](const MultiStateLaw& m) {
            const double a = m.death_pre + m.progression;
            const double absorbed = m.switch_probability * m.switch_cure_fraction;
            const double s = std::exp(-a * t) +
                             m.progression * ((1.0 - absorbed) * conv(a, m.death_post, t) +
                                              absorbed * (1.0 - std::exp(-a * t)) / a);
            return m.cure_fraction + (1.0 - m.cure_fraction) * s;
          },
      },
      law);
}

double law_density(const ArmModel& law, double t) {
  if (t <= 0.0) return 0.0;
  return std::visit(
      overloaded{
          [&](const LogNormalLaw& l) { return boost::math::pdf(boost::math::lognormal(l.meanlog, l.sdlog), t); },
          [&](const WeibullLaw& w) {
            const double z = std::pow(t / w.scale, w.shape);
            return w.shape / t * z * std::exp(-z);
          },
          [&](const ExponentialLaw& e) { return e.rate * std::exp(-e.rate * t); },
          [&](const MultiStateLaw& m) {
            const double a = m.death_pre + m.progression;
            const double absorbed = m.switch_probability * m.switch_cure_fraction;
            const double ds = -a * std::exp(-a * t) +
                              m.progression * ((1.0 - absorbed) * conv_dt(a, m.death_post, t) +
                                               absorbed * std::exp(-a * t));
            return -(1.0 - m.cure_fraction) * ds;
          },
      },
      law);
}

double law_sample(const ArmModel& law, std::mt19937_64& rng) {
  return std::visit(
      overloaded{
          [&](const LogNormalLaw& l) {
            std::normal_distribution<double> n(l.meanlog, l.sdlog);
            return std::exp(n(rng));
          },
          [&](const WeibullLaw& w) { return w.scale * std::pow(-std::log1p(-uniform(rng)), 1.0 / w.shape); },
          [&](const ExponentialLaw& e) { return exp_draw(e.rate, rng); },
          [&](const MultiStateLaw& m) {
            constexpr double never = std::numeric_limits<double>::infinity();
            if (uniform(rng) < m.cure_fraction) return never;
            const double t_death = exp_draw(m.death_pre, rng);
            const double t_prog = exp_draw(m.progression, rng);
            if (t_death <= t_prog) return t_death;
            if (m.switch_probability > 0.0 && uniform(rng) < m.switch_probability &&
                uniform(rng) < m.switch_cure_fraction) {
              return never;
            }
            return t_prog + exp_draw(m.death_post, rng);
          },
      },
      law);
}

std::string describe(const ArmModel& law) {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const LogNormalLaw& l) { os << "LogNormal(meanlog=" << l.meanlog << ", sdlog=" << l.sdlog << ")"; },
                 [&](const WeibullLaw& w) { os << "Weibull(scale=" << w.scale << ", shape=" << w.shape << ")"; },
                 [&](const ExponentialLaw& e) { os << "Exponential(rate=" << e.rate << ")"; },
                 [&](const MultiStateLaw& m) {
                   os << "MultiState(death_pre=" << m.death_pre << ", death_post=" << m.death_post
                      << ", progression=" << m.progression << ", cure=" << m.cure_fraction
                      << ", switch=" << m.switch_probability << ", switch_cure=" << m.switch_cure_fraction << ")";
                 },
             },
             law);
  return os.str();
}

void ScenarioConfig::validate() const {
  for (const auto& arm : arms) {
    const bool ok = std::visit(
        overloaded{
            [](const LogNormalLaw& l) { return std::isfinite(l.meanlog) && positive(l.sdlog); },
            [](const WeibullLaw& w) { return positive(w.scale) && positive(w.shape); },
            [](const ExponentialLaw& e) { return positive(e.rate); },
            [](const MultiStateLaw& m) {
              return positive(m.death_pre) && positive(m.death_post) && positive(m.progression) &&
                     probability(m.cure_fraction) && probability(m.switch_probability) &&
                     probability(m.switch_cure_fraction);
            },
        },
        arm);
    if (!ok) throw InvalidArgument("invalid arm model " + describe(arm));
  }
  if (!positive(recruit_years)) throw InvalidArgument("recruit_years must be positive");
  if (!positive(max_followup_years) || max_followup_years <= recruit_years) {
    throw InvalidArgument("study duration must exceed the recruitment window");
  }
  if (!(censor_rate >= 0.0) || !std::isfinite(censor_rate)) throw InvalidArgument("censor_rate must be >= 0");
}

ScenarioConfig scenario_preset(int id) {
  const double ln2 = std::log(2.0);
  ScenarioConfig c;
  c.id = id;
  switch (id) {
    case 1: {
      const double m = std::log(std::exp(0.8) - 0.5);
      c.name = "delayed effect";
      c.arms = {LogNormalLaw{m, m}, LogNormalLaw{0.8, 0.8}};
      c.recruit_years = 1.5;
      break;
    }
    case 2:
    case 3:
      c.name = id == 2 ? "crossing hazards" : "crossing hazards, long recruitment";
      c.arms = {WeibullLaw{2.0, 1.8}, WeibullLaw{3.5, 0.8}};
      c.recruit_years = id == 2 ? 1.0 : 2.0;
      break;
    case 4:
      c.name = "proportional hazards";
      c.arms = {ExponentialLaw{0.5}, ExponentialLaw{0.5 * 0.65}};
      c.recruit_years = 1.0;
      break;
    case 5: {
      // medians 12, 3 and 6 months for death before/after progression and progression
      MultiStateLaw control{ln2 / 1.0, ln2 / 0.25, ln2 / 0.5, 0.0, 0.7, 0.3};
      MultiStateLaw treated{ln2 / 1.0, ln2 / 0.25, ln2 / 0.5, 0.3, 0.0, 0.0};
      c.name = "cure fraction";
      c.arms = {control, treated};
      c.recruit_years = 1.5;
      break;
    }
    case 6: {
      const double rescue = ln2 / (10.0 / 12.0);
      MultiStateLaw control{ln2 / 1.0, rescue, ln2 / (9.0 / 12.0), 0.0, 0.0, 0.0};
      MultiStateLaw treated{ln2 / 2.0, rescue, ln2 / (16.0 / 12.0), 0.0, 0.0, 0.0};
      c.name = "rescue medication";
      c.arms = {control, treated};
      c.recruit_years = 1.5;
      break;
    }
    default:
      throw UnknownScenario("scenario must be 1..6, got " + std::to_string(id));
  }
  return c;
}

ScenarioConfig null_variant(const ScenarioConfig& cfg) {
  ScenarioConfig out = cfg;
  out.arms[1] = out.arms[0];
  out.null_variant = true;
  out.name += " (null)";
  return out;
}

std::vector<SubjectRecord> simulate_trial(const ScenarioConfig& cfg, std::size_t n_per_arm, std::uint64_t seed) {
  if (n_per_arm < 1) throw InvalidArgument("n_per_arm must be at least 1");
  cfg.validate();
  std::mt19937_64 rng = substream(seed, 0);
  std::vector<SubjectRecord> out;
  out.reserve(2 * n_per_arm);
  for (int g = 0; g < 2; ++g) {
    for (std::size_t i = 0; i < n_per_arm; ++i) {
      const double t_event = law_sample(cfg.arms[static_cast<std::size_t>(g)], rng);
      const double entry = cfg.recruit_years * uniform(rng);
      const double dropout = cfg.censor_rate > 0.0 ? exp_draw(cfg.censor_rate, rng)
                                                   : std::numeric_limits<double>::infinity();
      const double admin = cfg.max_followup_years - entry;
      double t = std::min({t_event, dropout, admin});
      const bool event = t_event <= std::min(dropout, admin);
      if (cfg.round_to_days) t = std::max(1.0, std::ceil(t / kDay)) * kDay;
      out.push_back({t, event, g});
    }
  }
  return out;
}

double true_value(const ScenarioConfig& cfg, const ParameterSpec& spec) {
  const ArmModel& c0 = cfg.arms[0];
  const ArmModel& c1 = cfg.arms[1];
  const double x = spec.arg;
  switch (spec.kind) {
    case ParamKind::SurvivalDiff:
      return law_survival(c1, x) - law_survival(c0, x);
    case ParamKind::SurvivalLogRatio:
      return std::log(law_survival(c1, x)) - std::log(law_survival(c0, x));
    case ParamKind::CloglogDiff:
      return std::log(-std::log(law_survival(c1, x))) - std::log(-std::log(law_survival(c0, x)));
    case ParamKind::QuantileDiff:
      return law_quantile(c1, x) - law_quantile(c0, x);
    case ParamKind::QuantileLogRatio:
      return std::log(law_quantile(c1, x)) - std::log(law_quantile(c0, x));
    case ParamKind::AvgHazardRatioLog: {
      const double i1 = integrate([&](double t) { return law_survival(c0, t) * law_density(c1, t); }, 0.0, x);
      const double i0 = integrate([&](double t) { return law_survival(c1, t) * law_density(c0, t); }, 0.0, x);
      return std::log(i1) - std::log(i0);
    }
    case ParamKind::RmstDiff:
      return integrate([&](double t) { return law_survival(c1, t) - law_survival(c0, t); }, 0.0, x);
    case ParamKind::LogrankScore:
    case ParamKind::CoxLogHR:
      return cfg.null_variant ? 0.0 : kNaN;
  }
  return kNaN;
}

std::vector<ParameterSpec> parameter_set(int id) {
  using K = ParamKind;
  const auto g = Alternative::greater;
  const auto l = Alternative::less;
  auto S = [&](double t) { return ParameterSpec{K::SurvivalDiff, t, g, 0.0}; };
  auto logS = [&](double t) { return ParameterSpec{K::SurvivalLogRatio, t, g, 0.0}; };
  auto cll = [&](double t) { return ParameterSpec{K::CloglogDiff, t, l, 0.0}; };
  const ParameterSpec rmst{K::RmstDiff, 3.0, g, 0.0};
  const ParameterSpec ahr{K::AvgHazardRatioLog, 3.0, l, 0.0};
  const ParameterSpec score{K::LogrankScore, 3.0, l, 0.0};
  switch (id) {
    case 1: return {ahr, rmst};
    case 2: return {S(1), S(2), S(3), ParameterSpec{K::QuantileDiff, 0.25, g, 0.0}, rmst};
    case 3: return {logS(1), logS(2), logS(3), ParameterSpec{K::QuantileLogRatio, 0.25, g, 0.0}, rmst};
    case 4: return {cll(1), cll(2), cll(3), ahr};
    case 5: return {S(1), S(2), S(3), score};
    case 6: return {cll(1), cll(2), cll(3), score};
    case 7: return {score, ahr, rmst};
    default: throw InvalidArgument("parameter set must be 1..7, got " + std::to_string(id));
  }
}

std::vector<SubjectRecord> study_replicate_data(const ScenarioConfig& cfg, std::size_t n_per_arm,
                                                std::uint64_t seed, std::size_t r) {
  std::mt19937_64 keys = substream(seed, r, 1);
  return simulate_trial(cfg, n_per_arm, keys());
}

ReplicationSummary run_study(const ScenarioConfig& cfg, std::span<const ParameterSpec> specs,
                             std::size_t n_per_arm, std::size_t n_reps, std::uint64_t seed,
                             const StudyOptions& opts) {
  if (n_reps < 1) throw InvalidArgument("n_reps must be at least 1");
  if (specs.empty()) throw InvalidArgument("at least one parameter is required");
  cfg.validate();
  const std::size_t m = specs.size();
  std::vector<double> truth(m);
  for (std::size_t k = 0; k < m; ++k) {
    try {
      truth[k] = true_value(cfg, specs[k]);
    } catch (const QuantileUndefined&) {
      truth[k] = kNaN;
    }
  }

  std::vector<RepOutcome> outcomes(n_reps);
  parallel_for(
      n_reps,
      [&](std::size_t r) {
        RepOutcome& o = outcomes[r];
        try {
          std::mt19937_64 keys = substream(seed, r, 1);
          const auto records = simulate_trial(cfg, n_per_arm, keys());
          const std::uint64_t mvn_seed = keys();
          const std::uint64_t pert_seed = keys();
          const TwoSample data = make_two_sample(records);
          EstimateVector ev;
          ev.specs.assign(specs.begin(), specs.end());
          for (const auto& s : specs) ev.estimates.push_back(estimate(data, s, opts.estimator));
          CovarianceMatrix cov;
          if (opts.cov_method == CovMethod::asymptotic) {
            cov = asymptotic_covariance(ev, data, opts.adjust_ties);
          } else {
            cov = perturbation_covariance(data, specs, pert_seed,
                                          PerturbationOptions{opts.n_resamples, opts.adjust_ties, 1});
          }
          const TestStatistics one = make_test_statistics(ev, cov, Sided::one);
          const MvnDraws z(one.R, opts.mvn_draws, mvn_seed);
          std::vector<double> p_unadj(m);
          for (std::size_t k = 0; k < m; ++k) p_unadj[k] = unadjusted_p(one.T(static_cast<Eigen::Index>(k)), one.orientation[k]);
          const SingleStepResult ss = single_step(one, z);
          const std::vector<double> p_closed = opts.closed_test ? closed_test(one, z) : ss.p;
          const std::vector<double> p_holm = holm_adjust(p_unadj);

          const TestStatistics two = make_test_statistics(ev, cov, Sided::two);
          const CiResult ci_adj = simultaneous_ci(two, ev, opts.ci_alpha, CiMethod::mvn, &z);
          const CiResult ci_unadj = simultaneous_ci(two, ev, opts.ci_alpha, CiMethod::unadjusted);
          const CiResult ci_bonf = simultaneous_ci(two, ev, opts.ci_alpha, CiMethod::bonferroni);

          auto covers = [&](const CiResult& ci, std::size_t k) {
            return static_cast<char>(truth[k] >= ci.analysis[k].lower && truth[k] <= ci.analysis[k].upper);
          };
          for (std::size_t k = 0; k < m; ++k) {
            o.theta.push_back(ev.estimates[k].theta);
            o.cov_unadj.push_back(covers(ci_unadj, k));
            o.cov_adj.push_back(covers(ci_adj, k));
            o.cov_bonf.push_back(covers(ci_bonf, k));
            o.rej_unadj.push_back(p_unadj[k] < opts.alpha);
            o.rej_closed.push_back(p_closed[k] < opts.alpha);
            o.rej_single.push_back(std::max(ss.p[k], p_closed[k]) < opts.alpha);
            o.rej_holm.push_back(p_holm[k] < opts.alpha);
          }
          o.ok = true;
        } catch (const Error&) {
          o.failure = category(std::current_exception());
        }
      },
      opts.threads);

  ReplicationSummary sum;
  sum.n_reps = n_reps;
  sum.specs.resize(m);
  std::vector<double> s1(m, 0.0), s2(m, 0.0), srep(m, 0.0);
  std::vector<double> cu(m, 0.0), ca(m, 0.0), cb(m, 0.0), ru(m, 0.0), rc(m, 0.0), rs(m, 0.0), rh(m, 0.0);
  double sim_a = 0.0, sim_u = 0.0, sim_b = 0.0, any_u = 0.0, any_c = 0.0, any_s = 0.0, any_h = 0.0;
  for (const auto& o : outcomes) {
    if (!o.ok) {
      ++sum.n_excluded;
      ++sum.exclusions[o.failure];
      continue;
    }
    ++sum.n_used;
    bool all_a = true, all_u = true, all_b = true;
    bool hit_u = false, hit_c = false, hit_s = false, hit_h = false;
    for (std::size_t k = 0; k < m; ++k) {
      s1[k] += o.theta[k];
      s2[k] += o.theta[k] * o.theta[k];
      srep[k] += to_report_scale(specs[k].kind, o.theta[k]);
      cu[k] += o.cov_unadj[k];
      ca[k] += o.cov_adj[k];
      cb[k] += o.cov_bonf[k];
      ru[k] += o.rej_unadj[k];
      rc[k] += o.rej_closed[k];
      rs[k] += o.rej_single[k];
      rh[k] += o.rej_holm[k];
      if (std::isfinite(truth[k])) {
        all_a = all_a && o.cov_adj[k];
        all_u = all_u && o.cov_unadj[k];
        all_b = all_b && o.cov_bonf[k];
      }
      hit_u = hit_u || o.rej_unadj[k];
      hit_c = hit_c || o.rej_closed[k];
      hit_s = hit_s || o.rej_single[k];
      hit_h = hit_h || o.rej_holm[k];
    }
    sim_a += all_a;
    sim_u += all_u;
    sim_b += all_b;
    any_u += hit_u;
    any_c += hit_c;
    any_s += hit_s;
    any_h += hit_h;
    sum.estimates.push_back(o.theta);
  }
  const double n = static_cast<double>(sum.n_used);
  const bool any_truth = std::any_of(truth.begin(), truth.end(), [](double t) { return std::isfinite(t); });
  auto rate = [&](double count) { return sum.n_used ? count / n : kNaN; };
  for (std::size_t k = 0; k < m; ++k) {
    SpecSummary& s = sum.specs[k];
    const bool has_truth = std::isfinite(truth[k]);
    s.label = specs[k].label();
    s.truth = truth[k];
    s.mean_estimate = rate(s1[k]);
    s.mean_report = rate(srep[k]);
    s.sd_estimate = sum.n_used > 1 ? std::sqrt(std::max(0.0, (s2[k] - s1[k] * s1[k] / n) / (n - 1.0))) : kNaN;
    s.coverage_unadjusted = has_truth ? rate(cu[k]) : kNaN;
    s.coverage_adjusted = has_truth ? rate(ca[k]) : kNaN;
    s.coverage_bonferroni = has_truth ? rate(cb[k]) : kNaN;
    s.reject_unadjusted = rate(ru[k]);
    s.reject_closed = rate(rc[k]);
    s.reject_single_step = rate(rs[k]);
    s.reject_holm = rate(rh[k]);
  }
  sum.simultaneous_coverage_adjusted = any_truth ? rate(sim_a) : kNaN;
  sum.simultaneous_coverage_unadjusted = any_truth ? rate(sim_u) : kNaN;
  sum.simultaneous_coverage_bonferroni = any_truth ? rate(sim_b) : kNaN;
  sum.any_unadjusted = rate(any_u);
  sum.any_closed = rate(any_c);
  sum.any_single_step = rate(any_s);
  sum.any_holm = rate(any_h);
  return sum;
}

}  // namespace nphinfer
