#include "nphinfer/estimators.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "nphinfer/errors.hpp"

namespace nphinfer {

namespace {

constexpr double kCoxBracket = 20.0;
constexpr double kCoxTolerance = 1e-8;
constexpr int kCoxMaxIter = 50;

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string fmt_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// number of event times <= t in a sorted grid
std::size_t count_up_to(const std::vector<double>& grid, double t) {
  return static_cast<std::size_t>(std::upper_bound(grid.begin(), grid.end(), t) - grid.begin());
}

void require_followup(const TwoSample& data, double t) {
  for (int g = 0; g < 2; ++g) {
    if (t > data[g].last_time()) {
      throw HorizonBeyondData("time " + fmt_number(t) + " lies beyond the last observed time " +
                              fmt_number(data[g].last_time()) + " in group " + std::to_string(g));
    }
  }
}

InfluenceIngredients constant_ingredients(const GroupSample& g, double a, double horizon) {
  return InfluenceIngredients{a, std::vector<double>(count_up_to(g.table.distinct_times, horizon), 1.0),
                              horizon};
}

// area under exp(-Lambda) on [0, cutoff]
double restricted_mean(const HazardCurve& c, double cutoff) {
  const auto& t = c.times();
  const auto& cum = c.cumulative();
  double area = 0.0;
  double prev_t = 0.0;
  double prev_s = 1.0;
  for (std::size_t j = 0; j < t.size() && t[j] <= cutoff; ++j) {
    area += prev_s * (t[j] - prev_t);
    prev_t = t[j];
    prev_s = std::exp(-cum[j]);
  }
  return area + prev_s * (cutoff - prev_t);
}

double avg_hazard_integral(const std::array<HazardCurve, 2>& curves, int g, double cutoff) {
  const HazardCurve& c = curves[static_cast<std::size_t>(g)];
  double acc = 0.0;
  for (std::size_t j = 0; j < c.size() && c.times()[j] <= cutoff; ++j) {
    const double s = c.times()[j];
    acc += curves[0].survival_left(s) * curves[1].survival_left(s) * c.increments()[j];
  }
  return acc;
}

// Pooled-grid counts for the logrank score.
struct PooledGrid {
  std::vector<double> times;
  std::vector<double> y0, y1, d0, d1;
};

PooledGrid pooled_grid(const TwoSample& data, double cutoff) {
  PooledGrid p;
  const auto& t0 = data[0].table.distinct_times;
  const auto& t1 = data[1].table.distinct_times;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < t0.size() || j < t1.size()) {
    double s;
    double d0 = 0.0;
    double d1 = 0.0;
    if (j >= t1.size() || (i < t0.size() && t0[i] < t1[j])) {
      s = t0[i];
      d0 = data[0].table.dN[i++];
    } else if (i >= t0.size() || t1[j] < t0[i]) {
      s = t1[j];
      d1 = data[1].table.dN[j++];
    } else {
      s = t0[i];
      d0 = data[0].table.dN[i++];
      d1 = data[1].table.dN[j++];
    }
    if (s > cutoff) break;
    p.times.push_back(s);
    p.y0.push_back(data[0].at_risk(s));
    p.y1.push_back(data[1].at_risk(s));
    p.d0.push_back(d0);
    p.d1.push_back(d1);
  }
  return p;
}

CoxScoreTerms terms_from_counts(const TwoSample& data, double cutoff) {
  const PooledGrid p = pooled_grid(data, cutoff);
  return CoxScoreTerms{p.y0, p.y1, p.d0, p.d1};
}

double survival_functional(const std::array<HazardCurve, 2>& c, ParamKind kind, double t) {
  const double l0 = c[0].cum_hazard(t);
  const double l1 = c[1].cum_hazard(t);
  switch (kind) {
    case ParamKind::SurvivalDiff:
      return std::exp(-l1) - std::exp(-l0);
    case ParamKind::SurvivalLogRatio:
      return l0 - l1;
    default:
      if (!(l0 > 0.0) || !(l1 > 0.0)) {
        throw DegenerateTransform("cumulative hazard is zero at " + fmt_number(t) +
                                  " in at least one group");
      }
      return std::log(l1) - std::log(l0);
  }
}

double score_functional(const TwoSample& data, const std::array<HazardCurve, 2>& c, double cutoff) {
  double u = 0.0;
  for (int g = 0; g < 2; ++g) {
    const HazardCurve& curve = c[static_cast<std::size_t>(g)];
    double part = 0.0;
    for (std::size_t j = 0; j < curve.size() && curve.times()[j] <= cutoff; ++j) {
      const double s = curve.times()[j];
      const double y0 = data[0].at_risk(s);
      const double y1 = data[1].at_risk(s);
      part += y0 * y1 / (y0 + y1) * curve.increments()[j];
    }
    u += g == 1 ? part : -part;
  }
  return u;
}

}  // namespace

void ParameterSpec::validate() const {
  if (!std::isfinite(arg) || !(arg > 0.0)) throw InvalidArgument("parameter argument must be positive");
  if ((kind == ParamKind::QuantileDiff || kind == ParamKind::QuantileLogRatio) && !(arg < 1.0)) {
    throw InvalidArgument("quantile level must lie in (0, 1)");
  }
  if (!std::isfinite(null_value)) throw InvalidArgument("null value must be finite");
}

std::string ParameterSpec::label() const {
  return std::string(kind_name(kind)) + "(" + fmt_number(arg) + ")";
}

ParamKind parse_kind(std::string_view name) {
  const std::string n = lower(name);
  if (n == "s") return ParamKind::SurvivalDiff;
  if (n == "logs") return ParamKind::SurvivalLogRatio;
  if (n == "cloglogs" || n == "cloglog") return ParamKind::CloglogDiff;
  if (n == "q") return ParamKind::QuantileDiff;
  if (n == "logq") return ParamKind::QuantileLogRatio;
  if (n == "avghr") return ParamKind::AvgHazardRatioLog;
  if (n == "rmst") return ParamKind::RmstDiff;
  if (n == "score" || n == "logrank") return ParamKind::LogrankScore;
  if (n == "hr" || n == "cox") return ParamKind::CoxLogHR;
  throw InvalidArgument("unknown parameter kind '" + std::string(name) + "'");
}

std::string_view kind_name(ParamKind kind) {
  switch (kind) {
    case ParamKind::SurvivalDiff: return "S";
    case ParamKind::SurvivalLogRatio: return "logS";
    case ParamKind::CloglogDiff: return "cloglogS";
    case ParamKind::QuantileDiff: return "Q";
    case ParamKind::QuantileLogRatio: return "logQ";
    case ParamKind::AvgHazardRatioLog: return "avgHR";
    case ParamKind::RmstDiff: return "RMST";
    case ParamKind::LogrankScore: return "score";
    case ParamKind::CoxLogHR: return "HR";
  }
  return "?";
}

Alternative parse_alternative(std::string_view name) {
  const std::string n = lower(name);
  if (n == "greater") return Alternative::greater;
  if (n == "less") return Alternative::less;
  if (n == "two_sided" || n == "two.sided" || n == "two-sided" || n == "two") return Alternative::two_sided;
  throw InvalidArgument("unknown alternative '" + std::string(name) + "'");
}

std::string_view alternative_name(Alternative alt) {
  switch (alt) {
    case Alternative::greater: return "greater";
    case Alternative::less: return "less";
    case Alternative::two_sided: return "two_sided";
  }
  return "?";
}

ParameterSpec parse_spec(std::string_view text) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : text) {
    if (ch == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  parts.push_back(cur);
  if (parts.size() < 2 || parts.size() > 4) {
    throw InvalidArgument("parameter must look like kind:arg[:alternative[:null]], got '" +
                          std::string(text) + "'");
  }
  auto number = [&](const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      throw InvalidArgument("not a number: '" + s + "' in '" + std::string(text) + "'");
    }
    return v;
  };
  ParameterSpec spec;
  spec.kind = parse_kind(parts[0]);
  spec.arg = number(parts[1]);
  if (parts.size() >= 3 && !parts[2].empty()) spec.alternative = parse_alternative(parts[2]);
  if (parts.size() == 4) spec.null_value = number(parts[3]);
  spec.validate();
  return spec;
}

bool is_log_scale(ParamKind kind) {
  switch (kind) {
    case ParamKind::SurvivalLogRatio:
    case ParamKind::CloglogDiff:
    case ParamKind::QuantileLogRatio:
    case ParamKind::AvgHazardRatioLog:
    case ParamKind::CoxLogHR:
      return true;
    default:
      return false;
  }
}

double to_report_scale(ParamKind kind, double value) { return is_log_scale(kind) ? std::exp(value) : value; }

std::vector<double> EstimateVector::theta() const {
  std::vector<double> out;
  out.reserve(estimates.size());
  for (const auto& e : estimates) out.push_back(e.theta);
  return out;
}

Estimate estimate_survival_diff(const TwoSample& data, double t) {
  require_followup(data, t);
  Estimate e;
  for (int g = 0; g < 2; ++g) {
    const double s = data[g].curve.survival(t);
    e.per_group[static_cast<std::size_t>(g)] = s;
    e.ingredients[static_cast<std::size_t>(g)] = constant_ingredients(data[g], -s, t);
  }
  e.theta = e.per_group[1] - e.per_group[0];
  return e;
}

Estimate estimate_survival_log_ratio(const TwoSample& data, double t) {
  require_followup(data, t);
  Estimate e;
  for (int g = 0; g < 2; ++g) {
    const double cum = data[g].curve.cum_hazard(t);
    if (!std::isfinite(cum)) throw DegenerateTransform("survival estimate is zero at " + fmt_number(t));
    e.per_group[static_cast<std::size_t>(g)] = -cum;
    e.ingredients[static_cast<std::size_t>(g)] = constant_ingredients(data[g], -1.0, t);
  }
  e.theta = e.per_group[1] - e.per_group[0];
  return e;
}

Estimate estimate_cloglog_diff(const TwoSample& data, double t) {
  require_followup(data, t);
  Estimate e;
  for (int g = 0; g < 2; ++g) {
    const double cum = data[g].curve.cum_hazard(t);
    if (!(cum > 0.0) || !std::isfinite(cum)) {
      throw DegenerateTransform("no events up to " + fmt_number(t) + " in group " + std::to_string(g));
    }
    e.per_group[static_cast<std::size_t>(g)] = std::log(cum);
    e.ingredients[static_cast<std::size_t>(g)] = constant_ingredients(data[g], 1.0 / cum, t);
  }
  e.theta = e.per_group[1] - e.per_group[0];
  return e;
}

Estimate estimate_quantile_diff(const TwoSample& data, double gamma, bool log_scale,
                                const EstimatorOptions& opts) {
  Estimate e;
  for (int g = 0; g < 2; ++g) {
    const double q = quantile_estimate(data[g].curve, gamma);
    const double rate = local_hazard(data[g], q, opts.bandwidth);
    const auto gi = static_cast<std::size_t>(g);
    if (log_scale) {
      if (!(q > 0.0)) throw DegenerateTransform("quantile estimate is zero");
      e.per_group[gi] = std::log(q);
      e.ingredients[gi] = constant_ingredients(data[g], -1.0 / (q * rate), q);
    } else {
      e.per_group[gi] = q;
      e.ingredients[gi] = constant_ingredients(data[g], -1.0 / rate, q);
    }
  }
  e.theta = e.per_group[1] - e.per_group[0];
  return e;
}

Estimate estimate_avg_hazard_ratio(const TwoSample& data, double cutoff) {
  const std::array<HazardCurve, 2> curves{data[0].curve, data[1].curve};
  Estimate e;
  for (int g = 0; g < 2; ++g) {
    const auto gi = static_cast<std::size_t>(g);
    const double integral = avg_hazard_integral(curves, g, cutoff);
    if (!(integral > 0.0)) {
      throw DegenerateTransform("no events up to " + fmt_number(cutoff) + " in group " + std::to_string(g));
    }
    e.per_group[gi] = std::log(integral);
    InfluenceIngredients ing;
    ing.a = 1.0 / integral;
    ing.horizon = cutoff;
    const auto& times = data[g].table.distinct_times;
    for (std::size_t j = 0; j < count_up_to(times, cutoff); ++j) {
      ing.H.push_back(curves[0].survival_left(times[j]) * curves[1].survival_left(times[j]));
    }
    e.ingredients[gi] = std::move(ing);
  }
  e.theta = e.per_group[1] - e.per_group[0];
  return e;
}

Estimate estimate_rmst_diff(const TwoSample& data, double cutoff) {
  require_followup(data, cutoff);
  Estimate e;
  for (int g = 0; g < 2; ++g) {
    const auto gi = static_cast<std::size_t>(g);
    const HazardCurve& c = data[g].curve;
    e.per_group[gi] = restricted_mean(c, cutoff);
    // H(t_m) = area under S from t_m to the cutoff
    const std::size_t k = count_up_to(c.times(), cutoff);
    InfluenceIngredients ing;
    ing.a = -1.0;
    ing.horizon = cutoff;
    ing.H.assign(k, 0.0);
    double tail = 0.0;
    for (std::size_t j = k; j-- > 0;) {
      const double next = (j + 1 < k) ? c.times()[j + 1] : cutoff;
      tail += std::exp(-c.cumulative()[j]) * (next - c.times()[j]);
      ing.H[j] = tail;
    }
    e.ingredients[gi] = std::move(ing);
  }
  e.theta = e.per_group[1] - e.per_group[0];
  return e;
}

double logrank_observed_minus_expected(const TwoSample& data, double cutoff) {
  const PooledGrid p = pooled_grid(data, cutoff);
  double u = 0.0;
  for (std::size_t j = 0; j < p.times.size(); ++j) {
    u += p.d1[j] - (p.d0[j] + p.d1[j]) * p.y1[j] / (p.y0[j] + p.y1[j]);
  }
  return u;
}

Estimate estimate_logrank_score(const TwoSample& data, double cutoff) {
  const PooledGrid p = pooled_grid(data, cutoff);
  if (p.times.empty()) throw DegenerateTransform("no events up to " + fmt_number(cutoff));
  Estimate e;
  // group terms of the score with M_i centred at the pooled null hazard
  double term0 = 0.0;
  double term1 = 0.0;
  for (std::size_t j = 0; j < p.times.size(); ++j) {
    const double y = p.y0[j] + p.y1[j];
    const double d = p.d0[j] + p.d1[j];
    term1 += p.y0[j] / y * (p.d1[j] - p.y1[j] * d / y);
    term0 += p.y1[j] / y * (p.d0[j] - p.y0[j] * d / y);
  }
  e.per_group = {term0, term1};
  e.theta = term1 - term0;
  for (int g = 0; g < 2; ++g) {
    InfluenceIngredients ing;
    ing.a = 1.0;
    ing.horizon = cutoff;
    const auto& times = data[g].table.distinct_times;
    for (std::size_t j = 0; j < count_up_to(times, cutoff); ++j) {
      const double y0 = data[0].at_risk(times[j]);
      const double y1 = data[1].at_risk(times[j]);
      ing.H.push_back(y0 * y1 / (y0 + y1));
    }
    e.ingredients[static_cast<std::size_t>(g)] = std::move(ing);
  }
  return e;
}

double CoxScoreTerms::score(double beta) const {
  const double eb = std::exp(beta);
  double u = 0.0;
  for (std::size_t j = 0; j < y0.size(); ++j) {
    u += (y0[j] * c1[j] - y1[j] * eb * c0[j]) / (y0[j] + y1[j] * eb);
  }
  return u;
}

double CoxScoreTerms::score_derivative(double beta) const {
  const double eb = std::exp(beta);
  double du = 0.0;
  for (std::size_t j = 0; j < y0.size(); ++j) {
    const double denom = y0[j] + y1[j] * eb;
    du -= y0[j] * y1[j] * eb * (c0[j] + c1[j]) / (denom * denom);
  }
  return du;
}

CoxScoreTerms cox_score_terms(const TwoSample& data, const std::array<HazardCurve, 2>& curves,
                              double cutoff) {
  PooledGrid p = pooled_grid(data, cutoff);
  CoxScoreTerms terms{p.y0, p.y1, std::vector<double>(p.times.size(), 0.0),
                      std::vector<double>(p.times.size(), 0.0)};
  for (int g = 0; g < 2; ++g) {
    const HazardCurve& c = curves[static_cast<std::size_t>(g)];
    auto& target = g == 0 ? terms.c0 : terms.c1;
    const auto& y = g == 0 ? p.y0 : p.y1;
    std::size_t k = 0;
    for (std::size_t j = 0; j < c.size() && c.times()[j] <= cutoff; ++j) {
      while (k < p.times.size() && p.times[k] < c.times()[j]) ++k;
      if (k < p.times.size() && p.times[k] == c.times()[j]) target[k] = y[k] * c.increments()[j];
    }
  }
  return terms;
}

double solve_cox(const CoxScoreTerms& terms) {
  double lo = -kCoxBracket;
  double hi = kCoxBracket;
  if (!(terms.score(lo) > 0.0) || !(terms.score(hi) < 0.0)) {
    throw NonconvergentFit("score does not change sign on [-20, 20] (monotone likelihood)");
  }
  double beta = 0.0;
  double u = terms.score(beta);
  for (int iter = 0; iter < kCoxMaxIter; ++iter) {
    if (std::abs(u) < kCoxTolerance) return beta;
    if (u > 0.0) {
      lo = beta;
    } else {
      hi = beta;
    }
    const double du = terms.score_derivative(beta);
    double step = (du < 0.0 && std::isfinite(du)) ? -u / du : 0.0;
    double next = beta + step;
    double u_next = 0.0;
    bool improved = false;
    if (step != 0.0) {
      for (int halving = 0; halving < 30; ++halving) {
        if (next > lo && next < hi) {
          u_next = terms.score(next);
          if (std::abs(u_next) < std::abs(u)) {
            improved = true;
            break;
          }
        }
        step *= 0.5;
        next = beta + step;
      }
    }
    if (!improved) {
      next = 0.5 * (lo + hi);
      u_next = terms.score(next);
    }
    beta = next;
    u = u_next;
  }
  if (std::abs(u) < kCoxTolerance) return beta;
  throw NonconvergentFit("Newton iteration for the Cox score did not converge");
}

Estimate estimate_cox_log_hr(const TwoSample& data, double cutoff) {
  const CoxScoreTerms terms = terms_from_counts(data, cutoff);
  if (terms.y0.empty()) throw NonconvergentFit("no events up to " + fmt_number(cutoff));
  const double beta = solve_cox(terms);
  const double info = -terms.score_derivative(beta);
  const double eb = std::exp(beta);
  Estimate e;
  e.per_group = {0.0, beta};
  e.theta = beta;
  for (int g = 0; g < 2; ++g) {
    InfluenceIngredients ing;
    ing.a = 1.0 / info;
    ing.horizon = cutoff;
    const auto& times = data[g].table.distinct_times;
    for (std::size_t j = 0; j < count_up_to(times, cutoff); ++j) {
      const double y0 = data[0].at_risk(times[j]);
      const double y1 = data[1].at_risk(times[j]);
      // group 1 enters unweighted, group 0 with the e^beta factor
      ing.H.push_back(y0 * y1 * (g == 0 ? eb : 1.0) / (y0 + y1 * eb));
    }
    e.ingredients[static_cast<std::size_t>(g)] = std::move(ing);
  }
  return e;
}

Estimate estimate(const TwoSample& data, const ParameterSpec& spec, const EstimatorOptions& opts) {
  spec.validate();
  switch (spec.kind) {
    case ParamKind::SurvivalDiff: return estimate_survival_diff(data, spec.arg);
    case ParamKind::SurvivalLogRatio: return estimate_survival_log_ratio(data, spec.arg);
    case ParamKind::CloglogDiff: return estimate_cloglog_diff(data, spec.arg);
    case ParamKind::QuantileDiff: return estimate_quantile_diff(data, spec.arg, false, opts);
    case ParamKind::QuantileLogRatio: return estimate_quantile_diff(data, spec.arg, true, opts);
    case ParamKind::AvgHazardRatioLog: return estimate_avg_hazard_ratio(data, spec.arg);
    case ParamKind::RmstDiff: return estimate_rmst_diff(data, spec.arg);
    case ParamKind::LogrankScore: return estimate_logrank_score(data, spec.arg);
    case ParamKind::CoxLogHR: return estimate_cox_log_hr(data, spec.arg);
  }
  throw InvalidArgument("unhandled parameter kind");
}

EstimateVector estimate_all(const TwoSample& data, std::span<const ParameterSpec> specs,
                            const EstimatorOptions& opts) {
  if (specs.empty()) throw InvalidArgument("at least one parameter is required");
  EstimateVector ev;
  ev.specs.assign(specs.begin(), specs.end());
  ev.estimates.reserve(specs.size());
  for (std::size_t k = 0; k < specs.size(); ++k) {
    try {
      ev.estimates.push_back(estimate(data, specs[k], opts));
    } catch (const Error& ex) {
      throw SpecError(k, specs[k].label(), ex.what());
    }
  }
  return ev;
}

double parameter_functional(const ParameterSpec& spec, const TwoSample& data,
                            const std::array<HazardCurve, 2>& curves) {
  switch (spec.kind) {
    case ParamKind::SurvivalDiff:
    case ParamKind::SurvivalLogRatio:
    case ParamKind::CloglogDiff:
      require_followup(data, spec.arg);
      return survival_functional(curves, spec.kind, spec.arg);
    case ParamKind::QuantileDiff:
    case ParamKind::QuantileLogRatio: {
      const double q0 = quantile_estimate(curves[0], spec.arg);
      const double q1 = quantile_estimate(curves[1], spec.arg);
      if (spec.kind == ParamKind::QuantileDiff) return q1 - q0;
      if (!(q0 > 0.0) || !(q1 > 0.0)) throw DegenerateTransform("quantile estimate is zero");
      return std::log(q1) - std::log(q0);
    }
    case ParamKind::AvgHazardRatioLog: {
      const double i0 = avg_hazard_integral(curves, 0, spec.arg);
      const double i1 = avg_hazard_integral(curves, 1, spec.arg);
      if (!(i0 > 0.0) || !(i1 > 0.0)) throw DegenerateTransform("average hazard integral is not positive");
      return std::log(i1) - std::log(i0);
    }
    case ParamKind::RmstDiff:
      require_followup(data, spec.arg);
      return restricted_mean(curves[1], spec.arg) - restricted_mean(curves[0], spec.arg);
    case ParamKind::LogrankScore:
      return score_functional(data, curves, spec.arg);
    case ParamKind::CoxLogHR:
      return solve_cox(cox_score_terms(data, curves, spec.arg));
  }
  throw InvalidArgument("unhandled parameter kind");
}

}  // namespace nphinfer
