// nphinfer command line: analyze a two-group survival dataset, run a
// simulation study, or emit step-function data for plotting.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nphinfer/analysis.hpp"
#include "nphinfer/errors.hpp"
#include "nphinfer/io.hpp"
#include "nphinfer/simulate.hpp"
#include "nphinfer/version.hpp"

namespace {

using namespace nphinfer;
using nlohmann::json;

constexpr int kExitUsage = 2;
constexpr int kExitEstimation = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<ParameterSpec> parse_specs(const std::vector<std::string>& texts) {
  std::vector<ParameterSpec> out;
  for (const auto& t : texts) {
    try {
      out.push_back(parse_spec(t));
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
  }
  return out;
}

std::vector<SubjectRecord> load_input(const std::string& path) {
  try {
    return read_records_csv(path);
  } catch (const CsvError& e) {
    throw UsageError(path + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(out_path);
  if (!f) throw UsageError("cannot write '" + out_path + "'");
  f << text;
}

std::string csv_number(double v) {
  if (std::isnan(v)) return "NA";
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::string input;
  std::vector<std::string> params;
  AnalysisConfig cfg;
  std::string sided = "two";
  std::string cov = "asymptotic";
  std::string format = "table";
  std::string out;
};

void add_analysis_options(CLI::App* cmd, AnalyzeArgs& a) {
  cmd->add_option("--input,-i", a.input, "CSV with columns time, event, group")->required();
  cmd->add_option("--param,-p", a.params, "kind:arg[:alternative[:null]], repeatable");
}

int run_analyze(AnalyzeArgs& a) {
  if (a.params.empty()) throw UsageError("at least one --param is required");
  a.cfg.specs = parse_specs(a.params);
  try {
    a.cfg.sided = parse_sided(a.sided);
    a.cfg.cov_method = parse_cov_method(a.cov);
    a.cfg.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  const auto records = load_input(a.input);
  AnalysisResult res;
  try {
    res = analyze(records, a.cfg);
  } catch (const SpecError& e) {
    std::cerr << "estimation error: " << e.what() << "\n";
    return kExitEstimation;
  } catch (const Error& e) {
    std::cerr << "estimation error: " << e.what() << "\n";
    return kExitEstimation;
  }
  emit(a.out, a.format == "json" ? to_json(res).dump(2) + "\n" : format_table(res));
  return 0;
}

// -------------------------------------------------------------- simulate

struct SimulateArgs {
  int scenario = 0;
  std::string config;
  int set = 0;
  std::vector<std::string> params;
  std::size_t n = 200;
  std::size_t reps = 2000;
  std::uint64_t seed = 1;
  std::string out;
  bool null_hypothesis = false;
  long dump_rep = -1;
  bool full = false;
  bool show_config = false;
  std::string cov = "asymptotic";
  StudyOptions opts;
};

ArmModel arm_from_json(const json& j) {
  const std::string law = j.at("law").get<std::string>();
  if (law == "exponential") return ExponentialLaw{j.at("rate").get<double>()};
  if (law == "weibull") return WeibullLaw{j.at("scale").get<double>(), j.at("shape").get<double>()};
  if (law == "lognormal") return LogNormalLaw{j.at("meanlog").get<double>(), j.at("sdlog").get<double>()};
  if (law == "multistate") {
    return MultiStateLaw{j.at("death_pre").get<double>(),       j.at("death_post").get<double>(),
                         j.at("progression").get<double>(),     j.value("cure_fraction", 0.0),
                         j.value("switch_probability", 0.0),    j.value("switch_cure_fraction", 0.0)};
  }
  throw UsageError("unknown law '" + law + "'");
}

json arm_to_json(const ArmModel& arm) {
  struct Visitor {
    json operator()(const ExponentialLaw& e) const { return {{"law", "exponential"}, {"rate", e.rate}}; }
    json operator()(const WeibullLaw& w) const { return {{"law", "weibull"}, {"scale", w.scale}, {"shape", w.shape}}; }
    json operator()(const LogNormalLaw& l) const {
      return {{"law", "lognormal"}, {"meanlog", l.meanlog}, {"sdlog", l.sdlog}};
    }
    json operator()(const MultiStateLaw& m) const {
      return {{"law", "multistate"},          {"death_pre", m.death_pre},
              {"death_post", m.death_post},   {"progression", m.progression},
              {"cure_fraction", m.cure_fraction}, {"switch_probability", m.switch_probability},
              {"switch_cure_fraction", m.switch_cure_fraction}};
    }
  };
  return std::visit(Visitor{}, arm);
}

json config_to_json(const ScenarioConfig& c) {
  return {{"id", c.id},
          {"name", c.name},
          {"arms", {arm_to_json(c.arms[0]), arm_to_json(c.arms[1])}},
          {"recruit_years", c.recruit_years},
          {"max_followup_years", c.max_followup_years},
          {"censor_rate", c.censor_rate},
          {"round_to_days", c.round_to_days},
          {"null_variant", c.null_variant}};
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot open '" + path + "'");
  try {
    const json j = json::parse(f);
    ScenarioConfig c;
    c.name = j.value("name", std::string("custom"));
    const auto& arms = j.at("arms");
    if (!arms.is_array() || arms.size() != 2) throw UsageError("config needs two arms (control, treatment)");
    c.arms = {arm_from_json(arms[0]), arm_from_json(arms[1])};
    c.recruit_years = j.value("recruit_years", c.recruit_years);
    c.max_followup_years = j.value("max_followup_years", c.max_followup_years);
    c.censor_rate = j.value("censor_rate", c.censor_rate);
    c.round_to_days = j.value("round_to_days", c.round_to_days);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw UsageError(path + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw UsageError(path + ": " + e.what());
  }
}

std::string summary_csv(const ReplicationSummary& s) {
  std::ostringstream os;
  os << "hypothesis,method,truth,mean_estimate,sd_estimate,coverage,rejection_rate,n_used,n_excluded\n";
  auto row = [&](const std::string& h, const char* method, double truth, double mean, double sd, double cov,
                 double rej) {
    os << h << ',' << method << ',' << csv_number(truth) << ',' << csv_number(mean) << ',' << csv_number(sd) << ','
       << csv_number(cov) << ',' << csv_number(rej) << ',' << s.n_used << ',' << s.n_excluded << '\n';
  };
  const double na = std::numeric_limits<double>::quiet_NaN();
  for (const auto& p : s.specs) {
    row(p.label, "unadjusted", p.truth, p.mean_estimate, p.sd_estimate, p.coverage_unadjusted, p.reject_unadjusted);
    row(p.label, "adjusted", p.truth, p.mean_estimate, p.sd_estimate, p.coverage_adjusted, p.reject_closed);
    row(p.label, "single_step", p.truth, p.mean_estimate, p.sd_estimate, na, p.reject_single_step);
    row(p.label, "holm", p.truth, p.mean_estimate, p.sd_estimate, na, p.reject_holm);
    row(p.label, "bonferroni", p.truth, p.mean_estimate, p.sd_estimate, p.coverage_bonferroni, na);
  }
  row("Any", "unadjusted", na, na, na, s.simultaneous_coverage_unadjusted, s.any_unadjusted);
  row("Any", "adjusted", na, na, na, s.simultaneous_coverage_adjusted, s.any_closed);
  row("Any", "single_step", na, na, na, na, s.any_single_step);
  row("Any", "holm", na, na, na, na, s.any_holm);
  row("Any", "bonferroni", na, na, na, s.simultaneous_coverage_bonferroni, na);
  return os.str();
}

json summary_json(const ReplicationSummary& s, const ScenarioConfig& cfg, const SimulateArgs& a) {
  json specs = json::array();
  auto num = [](double v) -> json { return std::isfinite(v) ? json(v) : json(nullptr); };
  for (const auto& p : s.specs) {
    specs.push_back({{"label", p.label},
                     {"truth", num(p.truth)},
                     {"mean_estimate", num(p.mean_estimate)},
                     {"mean_report_scale", num(p.mean_report)},
                     {"sd_estimate", num(p.sd_estimate)},
                     {"coverage", {{"unadjusted", num(p.coverage_unadjusted)},
                                   {"adjusted", num(p.coverage_adjusted)},
                                   {"bonferroni", num(p.coverage_bonferroni)}}},
                     {"rejection", {{"unadjusted", num(p.reject_unadjusted)},
                                    {"adjusted", num(p.reject_closed)},
                                    {"single_step", num(p.reject_single_step)},
                                    {"holm", num(p.reject_holm)}}}});
  }
  return {{"config", config_to_json(cfg)},
          {"n_per_arm", a.n},
          {"n_reps", s.n_reps},
          {"n_used", s.n_used},
          {"n_excluded", s.n_excluded},
          {"exclusions", s.exclusions},
          {"specs", specs},
          {"any", {{"unadjusted", num(s.any_unadjusted)},
                   {"adjusted", num(s.any_closed)},
                   {"single_step", num(s.any_single_step)},
                   {"holm", num(s.any_holm)}}},
          {"simultaneous_coverage", {{"unadjusted", num(s.simultaneous_coverage_unadjusted)},
                                     {"adjusted", num(s.simultaneous_coverage_adjusted)},
                                     {"bonferroni", num(s.simultaneous_coverage_bonferroni)}}},
          {"meta", {{"seed", a.seed}, {"draws", a.opts.mvn_draws}, {"version", kVersion}}}};
}

int run_simulate(SimulateArgs& a) {
  ScenarioConfig cfg;
  if (!a.config.empty()) {
    cfg = load_config(a.config);
  } else {
    try {
      cfg = scenario_preset(a.scenario);
    } catch (const UnknownScenario& e) {
      throw UsageError(e.what());
    }
  }
  if (a.null_hypothesis) cfg = null_variant(cfg);
  if (a.show_config) {
    std::cout << config_to_json(cfg).dump(2) << "\n";
    return 0;
  }
  if (a.dump_rep >= 0) {
    std::ostringstream os;
    write_records_csv(os, study_replicate_data(cfg, a.n, a.seed, static_cast<std::size_t>(a.dump_rep)));
    emit(a.out, os.str());
    return 0;
  }
  std::vector<ParameterSpec> specs = parse_specs(a.params);
  if (a.set > 0) {
    try {
      const auto extra = parameter_set(a.set);
      specs.insert(specs.end(), extra.begin(), extra.end());
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
  }
  if (specs.empty()) throw UsageError("give --set or at least one --param");
  try {
    a.opts.cov_method = parse_cov_method(a.cov);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  if (a.full) a.reps = 50000;
  const ReplicationSummary s = run_study(cfg, specs, a.n, a.reps, a.seed, a.opts);
  if (a.out.empty() || a.out == "-") {
    std::cout << summary_csv(s);
  } else {
    emit(a.out + ".csv", summary_csv(s));
    emit(a.out + ".json", summary_json(s, cfg, a).dump(2) + "\n");
  }
  return 0;
}

// -------------------------------------------------------------- plotdata

struct PlotArgs {
  std::string input;
  std::vector<std::string> params;
  std::string out;
};

int run_plotdata(PlotArgs& a) {
  const auto specs = parse_specs(a.params);
  const auto records = load_input(a.input);
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "time,survival,group,marker\n";
  TwoSample data;
  try {
    data = make_two_sample(records);
  } catch (const Error& e) {
    std::cerr << "estimation error: " << e.what() << "\n";
    return kExitEstimation;
  }
  for (int g = 0; g < 2; ++g) {
    const HazardCurve& c = data[g].curve;
    os << 0.0 << ',' << 1.0 << ',' << g << ",\n";
    for (std::size_t j = 0; j < c.size(); ++j) {
      os << c.times()[j] << ',' << std::exp(-c.cumulative()[j]) << ',' << g << ",\n";
    }
    const double last = data[g].last_time();
    if (c.size() == 0 || last > c.times().back()) os << last << ',' << c.survival(last) << ',' << g << ",\n";
  }
  for (const auto& s : specs) {
    for (int g = 0; g < 2; ++g) {
      const HazardCurve& c = data[g].curve;
      double t = s.arg;
      double y = 0.0;
      try {
        if (s.kind == ParamKind::QuantileDiff || s.kind == ParamKind::QuantileLogRatio) {
          t = quantile_estimate(c, s.arg);
          y = 1.0 - s.arg;
        } else {
          y = c.survival(t);
        }
      } catch (const QuantileUndefined& e) {
        std::cerr << "estimation error: " << s.label() << ": " << e.what() << "\n";
        return kExitEstimation;
      }
      os << t << ',' << y << ',' << g << ',' << s.label() << '\n';
    }
  }
  emit(a.out, os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simultaneous inference for two-group survival parameters"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  AnalyzeArgs an;
  auto* analyze_cmd = app.add_subcommand("analyze", "estimate, test and build simultaneous intervals");
  add_analysis_options(analyze_cmd, an);
  analyze_cmd->add_option("--alpha", an.cfg.alpha, "familywise level")->capture_default_str();
  analyze_cmd->add_option("--sided", an.sided, "one: per-parameter alternatives; two: two-sided throughout")
      ->check(CLI::IsMember({"one", "two"}))
      ->capture_default_str();
  analyze_cmd->add_option("--cov", an.cov, "covariance estimate")
      ->check(CLI::IsMember({"asymptotic", "perturbation"}))
      ->capture_default_str();
  analyze_cmd->add_option("--resamples", an.cfg.n_resamples, "perturbation resamples")->capture_default_str();
  analyze_cmd->add_flag("--adjust-ties", an.cfg.adjust_ties, "tie-corrected variance weights");
  analyze_cmd->add_option("--draws", an.cfg.mvn_draws, "multivariate normal draws")->capture_default_str();
  analyze_cmd->add_option("--seed", an.cfg.seed, "random seed")->capture_default_str();
  analyze_cmd->add_flag("--closed-test", an.cfg.closed_test, "closed-test adjusted p-values");
  analyze_cmd->add_option("--bandwidth", an.cfg.estimator.bandwidth, "local hazard window constant")
      ->capture_default_str();
  analyze_cmd->add_option("--threads", an.cfg.threads, "worker threads (0: NPH_INFER_THREADS or all cores)");
  analyze_cmd->add_option("--format", an.format, "output format")
      ->check(CLI::IsMember({"table", "json"}))
      ->capture_default_str();
  analyze_cmd->add_option("--out,-o", an.out, "output file (default stdout)");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "run a simulation study or dump one replication");
  auto* scen = sim_cmd->add_option("--scenario", sim.scenario, "preset 1..6");
  auto* conf = sim_cmd->add_option("--config", sim.config, "JSON scenario file");
  scen->excludes(conf);
  sim_cmd->add_option("--set", sim.set, "parameter set 1..7");
  sim_cmd->add_option("--param,-p", sim.params, "extra parameter kind:arg[:alternative[:null]]");
  sim_cmd->add_option("--n", sim.n, "subjects per arm")->capture_default_str();
  sim_cmd->add_option("--reps", sim.reps, "replications")->capture_default_str();
  sim_cmd->add_option("--seed", sim.seed, "random seed")->capture_default_str();
  sim_cmd->add_option("--out,-o", sim.out, "output prefix; writes PREFIX.csv and PREFIX.json");
  sim_cmd->add_flag("--null", sim.null_hypothesis, "both arms follow the control law");
  sim_cmd->add_option("--dump-rep", sim.dump_rep, "write the data of one replication as CSV and stop");
  sim_cmd->add_flag("--full", sim.full, "50,000 replications");
  sim_cmd->add_flag("--show-config", sim.show_config, "print the scenario configuration and stop");
  sim_cmd->add_option("--alpha", sim.opts.alpha, "one-sided familywise test level")->capture_default_str();
  sim_cmd->add_option("--cov", sim.cov, "covariance estimate")
      ->check(CLI::IsMember({"asymptotic", "perturbation"}))
      ->capture_default_str();
  sim_cmd->add_option("--resamples", sim.opts.n_resamples, "perturbation resamples")->capture_default_str();
  sim_cmd->add_option("--draws", sim.opts.mvn_draws, "multivariate normal draws per replication")
      ->capture_default_str();
  sim_cmd->add_option("--threads", sim.opts.threads, "worker threads");

  PlotArgs plot;
  auto* plot_cmd = app.add_subcommand("plotdata", "survival step coordinates with parameter markers");
  plot_cmd->add_option("--input,-i", plot.input, "CSV with columns time, event, group")->required();
  plot_cmd->add_option("--param,-p", plot.params, "parameters to mark");
  plot_cmd->add_option("--out,-o", plot.out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*analyze_cmd) return run_analyze(an);
    if (*sim_cmd) {
      if (sim.config.empty() && sim.scenario == 0) throw UsageError("give --scenario or --config");
      return run_simulate(sim);
    }
    if (*plot_cmd) return run_plotdata(plot);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEstimation;
  }
  return kExitUsage;
}
