#include "nphinfer/covariance.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

#include "nphinfer/errors.hpp"
#include "nphinfer/parallel.hpp"

namespace nphinfer {

namespace {

void check_diagonal(const Eigen::MatrixXd& sigma, std::span<const ParameterSpec> specs) {
  for (Eigen::Index k = 0; k < sigma.rows(); ++k) {
    const double v = sigma(k, k);
    if (!std::isfinite(v) || !(v > 0.0)) {
      const auto idx = static_cast<std::size_t>(k);
      throw DegenerateVariance(idx, "zero variance for parameter " + std::to_string(idx + 1) + " (" +
                                        specs[idx].label() + ")");
    }
  }
}

// Noise scale of each event subject, group by group: one entry per event,
// ordered by time, ties consecutive.
std::vector<double> event_scales(const GroupSample& g, bool adjust_ties) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(g.table.total_events()));
  for (std::size_t j = 0; j < g.table.size(); ++j) {
    const int y = g.table.Y[j];
    for (int r = 0; r < g.table.dN[j]; ++r) {
      out.push_back(1.0 / static_cast<double>(adjust_ties ? y - r : y));
    }
  }
  return out;
}

}  // namespace

CovMethod parse_cov_method(std::string_view name) {
  if (name == "asymptotic") return CovMethod::asymptotic;
  if (name == "perturbation") return CovMethod::perturbation;
  throw InvalidArgument("unknown covariance method '" + std::string(name) + "'");
}

std::string_view cov_method_name(CovMethod m) {
  return m == CovMethod::asymptotic ? "asymptotic" : "perturbation";
}

double tie_weight(int dN, int Y, bool adjust_ties) {
  if (dN <= 0) return 0.0;
  if (!adjust_ties) return static_cast<double>(dN) / (static_cast<double>(Y) * Y);
  double w = 0.0;
  for (int j = 0; j < dN; ++j) {
    const double r = static_cast<double>(Y - j);
    w += 1.0 / (r * r);
  }
  return w;
}

CovarianceMatrix asymptotic_covariance(const EstimateVector& ev, const TwoSample& data, bool adjust_ties) {
  const auto m = static_cast<Eigen::Index>(ev.size());
  if (m == 0) throw InvalidArgument("empty estimate vector");
  CovarianceMatrix cov;
  cov.method = CovMethod::asymptotic;
  cov.ties_adjusted = adjust_ties;
  for (int g = 0; g < 2; ++g) {
    const RiskTable& rt = data[g].table;
    std::vector<double> w(rt.size());
    for (std::size_t j = 0; j < rt.size(); ++j) w[j] = tie_weight(rt.dN[j], rt.Y[j], adjust_ties);

    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index k = 0; k < m; ++k) {
      const auto& ik = ev.estimates[static_cast<std::size_t>(k)].ingredients[static_cast<std::size_t>(g)];
      for (Eigen::Index l = 0; l <= k; ++l) {
        const auto& il = ev.estimates[static_cast<std::size_t>(l)].ingredients[static_cast<std::size_t>(g)];
        const std::size_t len = std::min({ik.H.size(), il.H.size(), w.size()});
        double acc = 0.0;
        for (std::size_t j = 0; j < len; ++j) acc += ik.H[j] * il.H[j] * w[j];
        s(k, l) = s(l, k) = ik.a * il.a * acc;
      }
    }
    cov.per_group[static_cast<std::size_t>(g)] = std::move(s);
  }
  cov.sigma = cov.per_group[0] + cov.per_group[1];
  check_diagonal(cov.sigma, ev.specs);
  return cov;
}

CovarianceMatrix perturbation_covariance(const TwoSample& data, std::span<const ParameterSpec> specs,
                                         std::uint64_t seed, const PerturbationOptions& opts) {
  if (specs.empty()) throw InvalidArgument("at least one parameter is required");
  if (opts.n_resamples < 2) throw InvalidArgument("n_resamples must be at least 2");
  for (const auto& s : specs) s.validate();

  const std::size_t K = opts.n_resamples;
  const std::size_t m = specs.size();
  const std::size_t cap = 10 * K;
  const std::array<std::vector<double>, 2> scales{event_scales(data[0], opts.adjust_ties),
                                                  event_scales(data[1], opts.adjust_ties)};

  Eigen::MatrixXd theta(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(m));
  std::atomic<std::size_t> total_draws{0};

  auto one_resample = [&](std::size_t l) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      if (total_draws.fetch_add(1) >= cap) {
        throw PerturbationFailure("more than " + std::to_string(cap) +
                                  " perturbation draws needed; too many degenerate resamples");
      }
      std::mt19937_64 rng = substream(seed, l, attempt);
      std::normal_distribution<double> norm;
      std::array<HazardCurve, 2> curves;
      for (int g = 0; g < 2; ++g) {
        const GroupSample& gs = data[g];
        const auto& sc = scales[static_cast<std::size_t>(g)];
        std::vector<double> inc = gs.curve.increments();
        std::size_t e = 0;
        for (std::size_t j = 0; j < gs.table.size(); ++j) {
          for (int r = 0; r < gs.table.dN[j]; ++r, ++e) inc[j] += norm(rng) * sc[e];
        }
        curves[static_cast<std::size_t>(g)] = HazardCurve(gs.table.distinct_times, std::move(inc));
      }
      try {
        for (std::size_t k = 0; k < m; ++k) {
          const double v = parameter_functional(specs[k], data, curves);
          if (!std::isfinite(v)) throw DegenerateTransform("non-finite resampled estimate");
          theta(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) = v;
        }
        return;
      } catch (const DegenerateTransform&) {
      } catch (const QuantileUndefined&) {
      } catch (const NonconvergentFit&) {
      }
    }
  };
  parallel_for(K, one_resample, opts.threads);

  const Eigen::RowVectorXd mean = theta.colwise().mean();
  const Eigen::MatrixXd centred = theta.rowwise() - mean;
  CovarianceMatrix cov;
  cov.method = CovMethod::perturbation;
  cov.ties_adjusted = opts.adjust_ties;
  cov.sigma = (centred.transpose() * centred) / static_cast<double>(K - 1);
  cov.sigma = 0.5 * (cov.sigma + cov.sigma.transpose());
  cov.n_rejected = total_draws.load() - K;
  check_diagonal(cov.sigma, specs);
  return cov;
}

}  // namespace nphinfer
