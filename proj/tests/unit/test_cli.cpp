#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = NPHINFER_CLI;
const std::string kPembro = std::string(NPHINFER_DATA_DIR) + "/pembro.csv";

struct Run {
  int code = -1;
  std::string out;
};

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / ("nphinfer_cli_" + std::to_string(::getpid()));
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

Run run(const std::string& args) {
  const fs::path out = scratch() / "stdout.txt";
  const std::string cmd = kCli + " " + args + " > " + out.string() + " 2> " + (scratch() / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  std::ifstream f(out);
  std::stringstream ss;
  ss << f.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

fs::path write_file(const std::string& name, const std::string& text) {
  const fs::path p = scratch() / name;
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run("analyze -i " + kPembro).code == 2);
  CHECK(run("analyze -i " + kPembro + " -p bogus:1").code == 2);
  CHECK(run("analyze -i /nonexistent.csv -p S:1").code == 2);
  const auto bad = write_file("bad.csv", "time,event,group\n1,1,0\n2,x,1\n");
  CHECK(run("analyze -i " + bad.string() + " -p S:1").code == 2);
  CHECK(run("simulate --scenario 9 --reps 1").code == 2);
  CHECK(run("nonsense").code == 2);
}

TEST_CASE("estimation errors exit with 3") {
  CHECK(run("analyze -i " + kPembro + " -p S:10").code == 3);
  const auto one = write_file("one_group.csv", "time,event,group\n1,1,0\n2,0,0\n");
  CHECK(run("analyze -i " + one.string() + " -p S:1").code == 3);
}

TEST_CASE("analyze writes json") {
  const auto r = run("analyze -i " + kPembro + " -p S:2 -p RMST:3.5 --draws 20000 --format json");
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["specs"].size() == 2);
  CHECK(std::abs(j["estimates"]["diff"][1].get<double>() - 0.204) < 0.005);
  CHECK(j["meta"]["draws"] == 20000);
}

TEST_CASE("plotdata starts each curve at one") {
  const auto r = run("plotdata -i " + kPembro + " -p S:2 -p Q:0.5");
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  CHECK(line == "time,survival,group,marker");
  std::getline(in, line);
  CHECK(line == "0,1,0,");
  CHECK(r.out.find("\n0,1,1,\n") != std::string::npos);
  CHECK(r.out.find(",1,Q(0.5)\n") != std::string::npos);
  CHECK(r.out.find(",0,S(2)\n") != std::string::npos);
}

TEST_CASE("simulate") {
  const auto cfg = run("simulate --scenario 5 --show-config");
  REQUIRE(cfg.code == 0);
  const auto j = nlohmann::json::parse(cfg.out);
  CHECK(j["recruit_years"] == 1.5);
  CHECK(j["arms"][1]["cure_fraction"] == 0.3);

  const auto s = run("simulate --scenario 4 --set 7 --n 60 --reps 1 --draws 2000");
  REQUIRE(s.code == 0);
  CHECK(s.out.rfind("hypothesis,method,truth,mean_estimate,sd_estimate,coverage,rejection_rate,n_used,n_excluded", 0) == 0);
  CHECK(s.out.find("Any,adjusted") != std::string::npos);

  const auto prefix = scratch() / "study";
  REQUIRE(run("simulate --scenario 4 -p S:1 --n 50 --reps 3 --draws 2000 --out " + prefix.string()).code == 0);
  CHECK(fs::exists(prefix.string() + ".csv"));
  std::ifstream jf(prefix.string() + ".json");
  const auto summary = nlohmann::json::parse(jf);
  CHECK(summary["n_reps"] == 3);

  const auto dump = run("simulate --scenario 2 --n 30 --seed 4 --dump-rep 2");
  REQUIRE(dump.code == 0);
  const auto path = write_file("dump.csv", dump.out);
  CHECK(run("analyze -i " + path.string() + " -p S:0.5 --draws 2000").code == 0);

  const auto custom = write_file("custom.json", R"({"arms": [{"law": "exponential", "rate": 0.5},
    {"law": "weibull", "scale": 2.0, "shape": 1.2}], "recruit_years": 1.0})");
  CHECK(run("simulate --config " + custom.string() + " -p RMST:2 --n 40 --reps 2 --draws 2000").code == 0);
  const auto broken = write_file("broken.json", R"({"arms": [{"law": "gamma"}, {"law": "gamma"}]})");
  CHECK(run("simulate --config " + broken.string() + " -p RMST:2 --reps 1").code == 2);
}
