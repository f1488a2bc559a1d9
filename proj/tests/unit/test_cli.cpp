#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"

#include "gmrt/cli.hpp"
#include "gmrt/config.hpp"
#include "gmrt/error.hpp"

using namespace gmrt;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gmrt_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

json quick_sampler() {
  return {{"chains", 2}, {"warmup", 150}, {"iters", 300}};
}

json model_block() {
  return {{"generation", {{"mean_days", 11.5}, {"sd_days", 8.5}}}, {"delay", {{"mean_days", 4.0}, {"sd_days", 4.0}}}};
}

/// A small case file and a fit config pointing at it.
fs::path fit_setup(const fs::path& dir, json extra = json::object()) {
  spit(dir / "cases.csv",
       "date,cases\n2020-06-14,120\n2020-06-21,150\n2020-06-28,190\n2020-07-05,240\n2020-07-12,260\n"
       "2020-07-19,250\n2020-07-26,210\n2020-08-02,170\n2020-08-09,140\n2020-08-16,130\n");
  json cfg = {{"seed", 3}, {"data", {{"cases_csv", "cases.csv"}}}, {"model", model_block()}, {"sampler", quick_sampler()}};
  cfg.merge_patch(extra);
  spit(dir / "fit.json", cfg.dump(2));
  return dir / "fit.json";
}

fs::path bench_setup(const fs::path& dir, int horizon) {
  json cfg = {{"seed", 5},
              {"model", model_block()},
              {"sampler", quick_sampler()},
              {"scenario", {{"horizon", horizon}, {"initial_infectious", 2000}}},
              {"benchmark", {{"replicates", 3}, {"priors", {"rw2", "ibm"}}}}};
  spit(dir / "bench.json", cfg.dump(2));
  return dir / "bench.json";
}

}  // namespace

TEST_CASE("config round trip through JSON") {
  const auto dir = scratch("roundtrip");
  const auto path = fit_setup(dir, {{"model", {{"prior", "hsgp"}, {"hyperpriors", {{"nu", {{"meanlog", -1.5}}}}}}}});
  const RunConfig c = load_config(path);
  CHECK(c.prior == PriorKind::hsgp);
  CHECK(c.hyper.nu.meanlog == -1.5);
  CHECK(c.hyper.nu.sdlog == 0.7);
  const json first = to_json(c);
  const json second = to_json(parse_config(first, dir));
  CHECK(first == second);
}

TEST_CASE("config errors name the offending key") {
  const auto dir = scratch("config_errors");
  try {
    parse_config(json{{"model", {{"priorr", "rw1"}}}}, dir);
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config_error);
    CHECK(std::string(e.what()).find("model.priorr") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config(json{{"sampler", {{"chains", -2}}}}, dir), Error);
  CHECK_THROWS_AS(parse_config(json{{"sampler", {{"target_accept", 1.5}}}}, dir), Error);
  CHECK_THROWS_AS(parse_config(json{{"benchmark", {{"mode", "sometimes"}}}}, dir), Error);

  json no_gen = {{"seed", 1}, {"data", {{"cases_csv", "cases.csv"}}}};
  fit_setup(dir);
  spit(dir / "no_gen.json", no_gen.dump());
  const auto r = cli({"fit", "--config", (dir / "no_gen.json").string(), "--output-dir", (dir / "out").string()});
  CHECK(r.code == exit_config_error);
  CHECK(r.err.find("model.generation") != std::string::npos);

  CHECK(cli({"fit", "--config", (dir / "missing.json").string()}).code == exit_config_error);
  CHECK(cli({"fit", "--config", (dir / "fit.json").string(), "--prior", "ar1"}).code == exit_config_error);
  CHECK(cli({"bogus"}).code == exit_config_error);
  CHECK(cli({"--help"}).code == exit_ok);
}

TEST_CASE("fit writes outputs and is reproducible") {
  const auto dir = scratch("fit");
  const auto cfg = fit_setup(dir);
  const auto a = cli({"fit", "--config", cfg.string(), "--prior", "rw2", "--output-dir", (dir / "a").string(),
                      "--save-draws", "--jobs", "2"});
  const auto b = cli({"fit", "--config", cfg.string(), "--prior", "rw2", "--output-dir", (dir / "b").string(),
                      "--save-draws"});
  REQUIRE((a.code == exit_ok || a.code == exit_diagnostics_failure));
  CHECK(b.code == a.code);
  for (const char* f : {"rt_summary.csv", "params_summary.csv", "draws.csv"}) {
    INFO(f);
    CHECK(fs::exists(dir / "a" / f));
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  const json m = json::parse(slurp(dir / "a" / "manifest.json"));
  CHECK(m["model"]["prior"] == "rw2");
  CHECK(m["manifest"]["seeds"]["master"] == 3);
  CHECK(m["manifest"]["seeds"]["chains"].size() == 2);
  CHECK(m["manifest"]["timing"].contains("cpu_minutes"));
  const json d = json::parse(slurp(dir / "a" / "diagnostics.json"));
  CHECK(d["prior"] == "rw2");
  CHECK(d["divergences"].size() == 2);

  // replaying the manifest reproduces the CSV outputs
  const auto c = cli({"fit", "--config", (dir / "a" / "manifest.json").string(), "--output-dir", (dir / "c").string()});
  CHECK(c.code == a.code);
  CHECK(slurp(dir / "a" / "rt_summary.csv") == slurp(dir / "c" / "rt_summary.csv"));

  const auto other = cli({"fit", "--config", cfg.string(), "--prior", "rw2", "--seed", "4", "--output-dir",
                          (dir / "d").string()});
  CHECK(slurp(dir / "a" / "rt_summary.csv") != slurp(dir / "d" / "rt_summary.csv"));
}

TEST_CASE("fit with too few iterations reports a diagnostics failure") {
  const auto dir = scratch("short_fit");
  const auto cfg = fit_setup(dir, {{"sampler", {{"chains", 2}, {"warmup", 20}, {"iters", 40}}}});
  const auto r = cli({"fit", "--config", cfg.string(), "--output-dir", (dir / "out").string()});
  CHECK(r.code == exit_diagnostics_failure);
  CHECK(r.err.find("diagnostics.json") != std::string::npos);
  CHECK(fs::exists(dir / "out" / "diagnostics.json"));
  CHECK(json::parse(slurp(dir / "out" / "diagnostics.json"))["passed"] == false);
}

TEST_CASE("simulate echoes the scenario") {
  const auto dir = scratch("simulate");
  const auto r = cli({"simulate", "--seed", "12", "--output-dir", (dir / "a").string()});
  REQUIRE(r.code == exit_ok);
  const json m = json::parse(slurp(dir / "a" / "manifest.json"));
  const json& p = m["manifest"]["parameters"];
  CHECK(p["population"] == 600000);
  CHECK(p["initial_infectious"] == 50);
  CHECK(p["mean_latent_period_weeks"].get<double>() == doctest::Approx(4.0 / 7.0));
  CHECK(p["mean_infectious_period_weeks"].get<double>() == doctest::Approx(7.5 / 7.0));
  CHECK(p["mean_immunity_weeks"].get<double>() == doctest::Approx(12.0));
  CHECK(p["horizon_weeks"] == 53);
  CHECK(m["manifest"]["seeds"]["master"] == 12);

  const auto sim = slurp(dir / "a" / "simulation.csv");
  CHECK(sim.rfind("week,S,E,I,R,e2i,true_rt,cases\n", 0) == 0);

  REQUIRE(cli({"simulate", "--seed", "13", "--output-dir", (dir / "b").string()}).code == exit_ok);
  CHECK(slurp(dir / "b" / "cases.csv") != slurp(dir / "a" / "cases.csv"));
  // every row of both runs keeps S + E + I + R at the population size
  for (const char* run : {"a", "b"}) {
    std::istringstream in(slurp(dir / run / "simulation.csv"));
    std::string line;
    std::getline(in, line);
    int rows = 0;
    while (std::getline(in, line)) {
      std::istringstream cells(line);
      std::string cell;
      std::vector<std::string> v;
      while (std::getline(cells, cell, ',')) v.push_back(cell);
      REQUIRE(v.size() == 8);
      CHECK(std::stoll(v[1]) + std::stoll(v[2]) + std::stoll(v[3]) + std::stoll(v[4]) == 600000);
      ++rows;
    }
    CHECK(rows == 53);
  }
}

TEST_CASE("benchmark requires a seed") {
  const auto dir = scratch("bench_seed");
  spit(dir / "b.json", json{{"model", model_block()}}.dump());
  const auto r = cli({"benchmark", "--config", (dir / "b.json").string(), "--output-dir", (dir / "o").string()});
  CHECK(r.code == exit_config_error);
  CHECK(r.err.find("seed") != std::string::npos);
}

TEST_CASE("retrospective benchmark outputs") {
  const auto dir = scratch("bench");
  const auto cfg = bench_setup(dir, 10);
  const auto r = cli({"benchmark", "--config", cfg.string(), "--output-dir", (dir / "o").string(), "--jobs", "2"});
  REQUIRE((r.code == exit_ok || r.code == exit_diagnostics_failure));
  const auto metrics = slurp(dir / "o" / "metrics.csv");
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 1 + 6);
  const auto summary = slurp(dir / "o" / "metrics_summary.csv");
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 1 + 2);
  const json m = json::parse(slurp(dir / "o" / "manifest.json"));
  for (const char* prior : {"rw2", "ibm"}) {
    const json& t = m["manifest"]["timing"]["retrospective"][prior];
    CHECK(t["min_cpu_minutes"].get<double>() <= t["mean_cpu_minutes"].get<double>());
    CHECK(t["mean_cpu_minutes"].get<double>() <= t["max_cpu_minutes"].get<double>());
    CHECK(m["manifest"]["seeds"]["fits"][prior].size() == 3);
  }
  CHECK(m["manifest"]["exit_code"] == r.code);

  // --prior narrows the comparison
  const auto one = cli({"benchmark", "--config", cfg.string(), "--prior", "rw2", "--output-dir", (dir / "p").string()});
  const auto metrics_one = slurp(dir / "p" / "metrics.csv");
  CHECK(std::count(metrics_one.begin(), metrics_one.end(), '\n') == 1 + 3);
  CHECK((one.code == exit_ok || one.code == exit_diagnostics_failure));
}

TEST_CASE("real-time benchmark outputs") {
  const auto dir = scratch("realtime");
  const auto cfg = bench_setup(dir, 12);
  const auto r = cli({"benchmark", "--config", cfg.string(), "--realtime", "--start-weeks", "10", "--prior", "rw1",
                      "--output-dir", (dir / "o").string()});
  REQUIRE((r.code == exit_ok || r.code == exit_diagnostics_failure));
  const auto rt = slurp(dir / "o" / "rw1" / "realtime.csv");
  CHECK(rt.rfind("T_prime,median,q10,q90,q025,q975,true_rt\n", 0) == 0);
  CHECK(std::count(rt.begin(), rt.end(), '\n') == 1 + 3);
  CHECK(fs::exists(dir / "o" / "realtime_metrics.csv"));
  CHECK_FALSE(fs::exists(dir / "o" / "metrics.csv"));

  CHECK(cli({"benchmark", "--config", cfg.string(), "--realtime", "--start-weeks", "13", "--output-dir",
             (dir / "x").string()})
            .code == exit_config_error);
  CHECK(cli({"benchmark", "--config", cfg.string(), "--realtime", "--start-weeks", "1", "--output-dir",
             (dir / "x").string()})
            .code == exit_config_error);
}
