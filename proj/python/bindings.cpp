#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "json.hpp"
#include "nphinfer/analysis.hpp"
#include "nphinfer/errors.hpp"
#include "nphinfer/io.hpp"
#include "nphinfer/simulate.hpp"
#include "nphinfer/version.hpp"

namespace py = pybind11;
using namespace nphinfer;

namespace {

std::vector<SubjectRecord> records(const std::vector<double>& time, const std::vector<int>& event,
                                   const std::vector<int>& group) {
  if (time.size() != event.size() || time.size() != group.size()) {
    throw InvalidArgument("time, event and group must have the same length");
  }
  std::vector<SubjectRecord> out(time.size());
  for (std::size_t i = 0; i < time.size(); ++i) {
    if (event[i] != 0 && event[i] != 1) throw InvalidArgument("event must be 0 or 1");
    out[i] = {time[i], event[i] == 1, group[i]};
  }
  return out;
}

std::vector<ParameterSpec> specs(const std::vector<std::string>& params) {
  std::vector<ParameterSpec> out;
  for (const auto& p : params) out.push_back(parse_spec(p));
  return out;
}

py::dict columns(const std::vector<SubjectRecord>& r) {
  std::vector<double> t;
  std::vector<int> e, g;
  for (const auto& x : r) {
    t.push_back(x.time);
    e.push_back(x.event ? 1 : 0);
    g.push_back(x.group);
  }
  py::dict d;
  d["time"] = t;
  d["event"] = e;
  d["group"] = g;
  return d;
}

ScenarioConfig scenario(int id, bool null) {
  ScenarioConfig c = scenario_preset(id);
  return null ? null_variant(c) : c;
}

std::string spec_text(const ParameterSpec& s) {
  std::ostringstream os;
  os << kind_name(s.kind) << ':' << s.arg << ':' << alternative_name(s.alternative) << ':' << s.null_value;
  return os.str();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "compiled core of nphinfer";
  m.attr("__version__") = std::string(kVersion);

  py::register_exception<Error>(m, "NphError", PyExc_RuntimeError);

  m.def(
      "analyze_json",
      [](const std::vector<double>& time, const std::vector<int>& event, const std::vector<int>& group,
         const std::vector<std::string>& params, double alpha, const std::string& sided, const std::string& cov,
         std::size_t resamples, bool adjust_ties, std::size_t draws, std::uint64_t seed, bool closed_test,
         double bandwidth) {
        AnalysisConfig cfg;
        cfg.specs = specs(params);
        cfg.alpha = alpha;
        cfg.sided = parse_sided(sided);
        cfg.cov_method = parse_cov_method(cov);
        cfg.n_resamples = resamples;
        cfg.adjust_ties = adjust_ties;
        cfg.mvn_draws = draws;
        cfg.seed = seed;
        cfg.closed_test = closed_test;
        cfg.estimator.bandwidth = bandwidth;
        const auto r = records(time, event, group);
        py::gil_scoped_release release;
        return to_json(analyze(r, cfg)).dump();
      },
      py::arg("time"), py::arg("event"), py::arg("group"), py::arg("params"), py::arg("alpha") = 0.05,
      py::arg("sided") = "two", py::arg("cov") = "asymptotic", py::arg("resamples") = 25000,
      py::arg("adjust_ties") = false, py::arg("draws") = kDefaultMvnDraws, py::arg("seed") = 1,
      py::arg("closed_test") = false, py::arg("bandwidth") = 2.0);

  m.def(
      "estimate",
      [](const std::vector<double>& time, const std::vector<int>& event, const std::vector<int>& group,
         const std::string& param) {
        const auto r = records(time, event, group);
        const Estimate e = nphinfer::estimate(make_two_sample(r), parse_spec(param));
        py::dict d;
        d["theta"] = e.theta;
        d["per_group"] = std::vector<double>{e.per_group[0], e.per_group[1]};
        return d;
      },
      py::arg("time"), py::arg("event"), py::arg("group"), py::arg("param"));

  m.def(
      "read_csv", [](const std::string& path) { return columns(read_records_csv(path)); }, py::arg("path"));

  m.def(
      "simulate_trial",
      [](int id, std::size_t n, std::uint64_t seed, bool null) {
        return columns(nphinfer::simulate_trial(scenario(id, null), n, seed));
      },
      py::arg("scenario"), py::arg("n"), py::arg("seed") = 1, py::arg("null") = false);

  m.def(
      "true_value", [](int id, const std::string& param, bool null) {
        return nphinfer::true_value(scenario(id, null), parse_spec(param));
      },
      py::arg("scenario"), py::arg("param"), py::arg("null") = false);

  m.def(
      "parameter_set",
      [](int id) {
        std::vector<std::string> out;
        for (const auto& s : nphinfer::parameter_set(id)) out.push_back(spec_text(s));
        return out;
      },
      py::arg("id"));

  m.def(
      "run_study",
      [](int id, const std::vector<std::string>& params, std::size_t n, std::size_t reps, std::uint64_t seed,
         bool null, double alpha, std::size_t draws, unsigned threads) {
        const auto cfg = scenario(id, null);
        const auto sp = specs(params);
        StudyOptions opts;
        opts.alpha = alpha;
        opts.mvn_draws = draws;
        opts.threads = threads;
        ReplicationSummary s;
        {
          py::gil_scoped_release release;
          s = nphinfer::run_study(cfg, sp, n, reps, seed, opts);
        }
        py::list rows;
        for (const auto& p : s.specs) {
          py::dict d;
          d["label"] = p.label;
          d["truth"] = p.truth;
          d["mean_estimate"] = p.mean_estimate;
          d["sd_estimate"] = p.sd_estimate;
          d["coverage_unadjusted"] = p.coverage_unadjusted;
          d["coverage_adjusted"] = p.coverage_adjusted;
          d["reject_unadjusted"] = p.reject_unadjusted;
          d["reject_adjusted"] = p.reject_closed;
          d["reject_holm"] = p.reject_holm;
          rows.append(d);
        }
        py::dict out;
        out["specs"] = rows;
        out["n_used"] = s.n_used;
        out["n_excluded"] = s.n_excluded;
        out["exclusions"] = s.exclusions;
        out["any_unadjusted"] = s.any_unadjusted;
        out["any_adjusted"] = s.any_closed;
        out["simultaneous_coverage_adjusted"] = s.simultaneous_coverage_adjusted;
        return out;
      },
      py::arg("scenario"), py::arg("params"), py::arg("n"), py::arg("reps"), py::arg("seed") = 1,
      py::arg("null") = false, py::arg("alpha") = 0.025, py::arg("draws") = 20000, py::arg("threads") = 0);
}
