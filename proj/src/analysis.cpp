#include "nphinfer/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "nphinfer/errors.hpp"
#include "nphinfer/version.hpp"

namespace nphinfer {

namespace {

nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

nlohmann::json numbers(const std::vector<double>& v) {
  nlohmann::json out = nlohmann::json::array();
  for (double x : v) out.push_back(number(x));
  return out;
}

nlohmann::json matrix(const Eigen::MatrixXd& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(number(m(i, j)));
    out.push_back(row);
  }
  return out;
}

nlohmann::json bounds(const CiResult& ci) {
  std::vector<double> lo, hi, alo, ahi;
  for (std::size_t k = 0; k < ci.report.size(); ++k) {
    lo.push_back(ci.report[k].lower);
    hi.push_back(ci.report[k].upper);
    alo.push_back(ci.analysis[k].lower);
    ahi.push_back(ci.analysis[k].upper);
  }
  return {{"lower", numbers(lo)},
          {"upper", numbers(hi)},
          {"analysis_lower", numbers(alo)},
          {"analysis_upper", numbers(ahi)},
          {"critical", numbers(ci.critical)}};
}

std::string fixed(double v, int digits) {
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string interval(const Interval& iv) { return "[" + fixed(iv.lower, 3) + ", " + fixed(iv.upper, 3) + "]"; }

std::string pad(const std::string& s, std::size_t w, bool left = false) {
  if (s.size() >= w) return s;
  return left ? s + std::string(w - s.size(), ' ') : std::string(w - s.size(), ' ') + s;
}

}  // namespace

void AnalysisConfig::validate() const {
  if (specs.empty()) throw InvalidArgument("at least one parameter is required");
  if (!(alpha > 0.0 && alpha <= 0.5)) throw InvalidArgument("alpha must lie in (0, 0.5]");
  if (mvn_draws == 0) throw InvalidArgument("draws must be positive");
  if (cov_method == CovMethod::perturbation && n_resamples < 2) {
    throw InvalidArgument("resamples must be at least 2");
  }
  for (const auto& s : specs) s.validate();
}

AnalysisResult analyze(std::span<const SubjectRecord> records, const AnalysisConfig& cfg) {
  cfg.validate();
  AnalysisResult res;
  res.config = cfg;
  const TwoSample data = make_two_sample(records);
  res.estimates = estimate_all(data, cfg.specs, cfg.estimator);
  try {
    if (cfg.cov_method == CovMethod::asymptotic) {
      res.covariance = asymptotic_covariance(res.estimates, data, cfg.adjust_ties);
    } else {
      res.covariance = perturbation_covariance(data, cfg.specs, cfg.seed,
                                               PerturbationOptions{cfg.n_resamples, cfg.adjust_ties, cfg.threads});
    }
  } catch (const DegenerateVariance& e) {
    throw SpecError(e.index(), cfg.specs[e.index()].label(), e.what());
  }
  InferenceOptions io;
  io.alpha = cfg.alpha;
  io.sided = cfg.sided;
  io.draws = cfg.mvn_draws;
  io.seed = cfg.seed;
  io.closed_test = cfg.closed_test;
  res.report = infer(res.estimates, res.covariance, io);
  return res;
}

nlohmann::json to_json(const AnalysisResult& res) {
  const auto& ev = res.estimates;
  const auto& rep = res.report;
  nlohmann::json specs = nlohmann::json::array();
  nlohmann::json per_group = nlohmann::json::array();
  std::vector<double> diff, report_scale;
  for (std::size_t k = 0; k < ev.size(); ++k) {
    const auto& s = ev.specs[k];
    specs.push_back({{"label", s.label()},
                     {"kind", std::string(kind_name(s.kind))},
                     {"arg", s.arg},
                     {"alternative", std::string(alternative_name(s.alternative))},
                     {"null", s.null_value},
                     {"log_scale", is_log_scale(s.kind)}});
    per_group.push_back({number(ev.estimates[k].per_group[0]), number(ev.estimates[k].per_group[1])});
    diff.push_back(ev.estimates[k].theta);
    report_scale.push_back(to_report_scale(s.kind, ev.estimates[k].theta));
  }
  std::vector<double> stat(rep.stats.T.data(), rep.stats.T.data() + rep.stats.T.size());
  nlohmann::json ci = bounds(rep.ci_mvn);
  ci["level"] = rep.ci_mvn.level;
  ci["method"] = "mvn";
  ci["sided"] = std::string(sided_name(res.config.sided));
  ci["unadjusted"] = bounds(rep.ci_unadjusted);
  ci["bonferroni"] = bounds(rep.ci_bonferroni);
  return {
      {"specs", specs},
      {"estimates", {{"per_group", per_group}, {"diff", numbers(diff)}, {"report_scale", numbers(report_scale)}}},
      {"covariance",
       {{"method", std::string(cov_method_name(res.covariance.method))},
        {"ties_adjusted", res.covariance.ties_adjusted},
        {"sigma", matrix(res.covariance.sigma)},
        {"correlation", matrix(rep.stats.R)}}},
      {"tests",
       {{"statistic", numbers(stat)},
        {"p_unadj", numbers(rep.p_unadjusted)},
        {"p_adj", numbers(rep.p_adjusted())},
        {"p_adj_method", rep.p_closed.empty() ? "single_step" : "closed_test"},
        {"p_single_step", numbers(rep.p_single_step)},
        {"p_holm", numbers(rep.p_holm)},
        {"p_global", rep.p_global}}},
      {"ci", ci},
      {"meta",
       {{"seed", res.config.seed},
        {"draws", rep.mvn_draws},
        {"version", kVersion},
        {"alpha", rep.alpha},
        {"resamples", res.covariance.method == CovMethod::perturbation ? res.config.n_resamples : 0}}},
  };
}

std::string format_table(const AnalysisResult& res) {
  const auto& ev = res.estimates;
  const auto& rep = res.report;
  std::size_t wl = 9;
  for (const auto& s : ev.specs) wl = std::max(wl, s.label().size());
  std::ostringstream os;
  const int pct = static_cast<int>(std::lround(100.0 * rep.ci_mvn.level));
  os << pad("parameter", wl, true) << pad("group 1", 9) << pad("group 0", 9) << pad("diff", 9)
     << pad("unadjusted", 18) << pad("mvn adjusted", 18) << pad("bonferroni", 18) << "\n";
  for (std::size_t k = 0; k < ev.size(); ++k) {
    const auto& s = ev.specs[k];
    const auto& e = ev.estimates[k];
    auto shown = [&](double v) { return to_report_scale(s.kind, v); };
    os << pad(s.label(), wl, true) << pad(fixed(shown(e.per_group[1]), 3), 9) << pad(fixed(shown(e.per_group[0]), 3), 9)
       << pad(fixed(shown(e.theta), 3), 9) << pad(interval(rep.ci_unadjusted.report[k]), 18)
       << pad(interval(rep.ci_mvn.report[k]), 18) << pad(interval(rep.ci_bonferroni.report[k]), 18) << "\n";
  }
  os << "intervals: " << pct << "% " << (res.config.sided == Sided::two ? "two-sided" : "one-sided")
     << ", covariance " << cov_method_name(res.covariance.method) << "\n\n";
  const char* adj = rep.p_closed.empty() ? "p single-step" : "p closed";
  os << pad("parameter", wl, true) << pad("alternative", 12) << pad("z", 9) << pad("p unadj", 10) << pad(adj, 15)
     << pad("p holm", 10) << "\n";
  for (std::size_t k = 0; k < ev.size(); ++k) {
    os << pad(ev.specs[k].label(), wl, true) << pad(std::string(alternative_name(rep.stats.orientation[k])), 12)
       << pad(fixed(rep.stats.T(static_cast<Eigen::Index>(k)), 3), 9) << pad(fixed(rep.p_unadjusted[k], 4), 10)
       << pad(fixed(rep.p_adjusted()[k], 4), 15) << pad(fixed(rep.p_holm[k], 4), 10) << "\n";
  }
  os << "global p = " << fixed(rep.p_global, 4) << "; mvn draws " << rep.mvn_draws << ", seed " << res.config.seed
     << "\n";
  return os.str();
}

}  // namespace nphinfer
