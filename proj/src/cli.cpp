#include "gmrt/cli.hpp"

#include <boost/version.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include "gmrt/config.hpp"
#include "gmrt/error.hpp"
#include "gmrt/harness.hpp"

#ifndef GMRT_VERSION
#define GMRT_VERSION "0.0.0"
#endif

namespace gmrt {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> output_dir;
  std::vector<std::string> priors;
  bool realtime = false;
  std::optional<std::size_t> start_weeks;
  bool save_draws = false;
};

[[noreturn]] void config_fail(const std::string& msg) { throw Error(ErrorCode::config_error, msg); }

class DiagnosticsFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

RunConfig load(const Overrides& o) {
  RunConfig c = o.config.empty() ? parse_config(json::object(), fs::current_path()) : load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.jobs) {
    if (*o.jobs < 1) config_fail("--jobs must be >= 1");
    c.jobs = *o.jobs;
  }
  if (o.output_dir) c.output_dir = fs::absolute(*o.output_dir).string();
  if (o.save_draws) c.save_draws = true;
  if (o.start_weeks) {
    if (*o.start_weeks < 2) config_fail("--start-weeks must be >= 2");
    c.benchmark.start_weeks = *o.start_weeks;
  }
  if (o.realtime && c.benchmark.mode == BenchmarkMode::retrospective) c.benchmark.mode = BenchmarkMode::realtime;
  if (!o.priors.empty()) {
    std::vector<PriorKind> kinds;
    for (const auto& p : o.priors) {
      try {
        kinds.push_back(parse_prior_kind(p));
      } catch (const Error& e) {
        config_fail(std::string("--prior: ") + e.what());
      }
    }
    c.prior = kinds.front();
    c.benchmark.priors = kinds;
  }
  return c;
}

fs::path output_dir(const RunConfig& c) {
  const fs::path dir = c.resolve(c.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::runtime_failure, "cannot create output directory " + dir.string());
  return dir;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& fn) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::runtime_failure, "cannot write " + path.string());
  fn(out);
  out.flush();
  if (!out) throw Error(ErrorCode::runtime_failure, "error writing " + path.string());
}

json manifest_header(const std::string& command) {
  return {{"command", command},
          {"version", GMRT_VERSION},
          {"compiler", __VERSION__},
          {"boost", BOOST_LIB_VERSION},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
}

void write_manifest(const fs::path& dir, RunConfig config, json manifest) {
  config.output_dir = dir.string();
  json doc = to_json(config);
  doc["manifest"] = std::move(manifest);
  write_file(dir / "manifest.json", [&](std::ostream& o) { o << doc.dump(2) << '\n'; });
}

CaseSeries load_cases(const RunConfig& c) {
  if (!c.cases_csv) config_fail("missing required key data.cases_csv");
  const fs::path path = c.resolve(*c.cases_csv);
  if (!fs::exists(path)) config_fail("data.cases_csv: file not found: " + path.string());
  try {
    return read_case_csv(path);
  } catch (const Error& e) {
    config_fail("data.cases_csv: " + std::string(e.what()));
  }
}

json seirs_echo(const Scenario& sc) {
  const auto& p = sc.seirs;
  json r0 = json::array();
  for (const auto& k : p.beta) r0.push_back({k.week, k.beta / p.gamma_infectious});
  return {{"population", p.population},
          {"initial_infectious", p.initial_infectious},
          {"initial_exposed", p.initial_exposed},
          {"mean_latent_period_weeks", 1.0 / p.sigma_latent},
          {"mean_infectious_period_weeks", 1.0 / p.gamma_infectious},
          {"mean_immunity_weeks", 1.0 / p.omega},
          {"horizon_weeks", p.horizon},
          {"r0_knots", r0},
          {"dt_weeks", sc.dt},
          {"ascertainment_rho", sc.rho},
          {"overdispersion_kappa", sc.kappa}};
}

// --- fit --------------------------------------------------------------------------

int cmd_fit(const Overrides& o, std::ostream& out) {
  const RunConfig config = load(o);
  const CaseSeries cases = load_cases(config);
  const ModelSpec spec = config.model_spec(config.prior);
  const SamplerConfig sampler = config.sampler_for_run();
  const fs::path dir = output_dir(config);

  const FitResult fit = fit_model(spec, cases, sampler, config.thresholds);

  write_file(dir / "rt_summary.csv", [&](std::ostream& f) { write_rt_summary(f, cases, fit.rt); });
  write_file(dir / "params_summary.csv", [&](std::ostream& f) { write_params_summary(f, fit.params); });
  write_file(dir / "diagnostics.json", [&](std::ostream& f) { write_diagnostics_json(f, fit); });
  if (config.save_draws) write_file(dir / "draws.csv", [&](std::ostream& f) { write_draws(f, fit.draws); });

  json m = manifest_header("fit");
  m["seeds"] = {{"master", sampler.seed}};
  json chains = json::array();
  for (int c = 0; c < sampler.chains; ++c) chains.push_back(derive_seed(sampler.seed, "chain", c));
  m["seeds"]["chains"] = chains;
  m["timing"] = {{"cpu_minutes", fit.diagnostics.cpu_seconds / 60.0}};
  m["diagnostics_passed"] = fit.diagnostics.passed();
  write_manifest(dir, config, m);

  out << "fit " << to_string(spec.prior) << ": " << cases.size() << " weeks, max R-hat "
      << fit.diagnostics.max_rhat << ", min ESS " << fit.diagnostics.min_ess << ", divergences "
      << fit.diagnostics.total_divergences() << " -> " << dir.string() << '\n';
  if (!fit.diagnostics.passed()) {
    const auto violations = fit.diagnostics.violations();
    std::string names;
    for (std::size_t i = 0; i < std::min<std::size_t>(violations.size(), 8); ++i) {
      names += (i ? ", " : "") + violations[i];
    }
    if (violations.size() > 8) names += " and " + std::to_string(violations.size() - 8) + " more";
    throw DiagnosticsFailure("thresholds not met for " + names + " (see diagnostics.json)");
  }
  return exit_ok;
}

// --- simulate ---------------------------------------------------------------------

int cmd_simulate(const Overrides& o, std::ostream& out) {
  RunConfig config = load(o);
  const std::uint64_t seed = config.seed.value_or(1);
  config.seed = seed;
  const fs::path dir = output_dir(config);

  const Dataset data = make_dataset(config.scenario, seed, 0);
  write_file(dir / "simulation.csv", [&](std::ostream& f) { write_simulation(f, data.truth, data.cases); });
  write_file(dir / "cases.csv", [&](std::ostream& f) { write_case_csv(f, data.cases); });

  json m = manifest_header("simulate");
  m["seeds"] = {{"master", seed}, {"replicate", data.seed}};
  m["parameters"] = seirs_echo(config.scenario);
  write_manifest(dir, config, m);

  out << "simulate: " << data.truth.weeks() << " weeks, " << std::accumulate(data.cases.counts().begin(), data.cases.counts().end(), std::int64_t{0})
      << " observed cases -> " << dir.string() << '\n';
  return exit_ok;
}

// --- benchmark --------------------------------------------------------------------

json timing_json(double mean, double lo, double hi) {
  return {{"mean_cpu_minutes", mean}, {"min_cpu_minutes", lo}, {"max_cpu_minutes", hi}};
}

int cmd_benchmark(const Overrides& o, std::ostream& out) {
  const RunConfig config = load(o);
  if (!config.seed) config_fail("missing required key seed (or pass --seed)");
  const std::uint64_t seed = *config.seed;
  const auto& bench = config.benchmark;
  std::vector<ModelSpec> specs;
  for (PriorKind k : bench.priors) specs.push_back(config.model_spec(k));
  const bool retro = bench.mode != BenchmarkMode::realtime;
  const bool realtime = bench.mode != BenchmarkMode::retrospective;
  if (realtime && bench.start_weeks > static_cast<std::size_t>(config.scenario.seirs.horizon)) {
    config_fail("benchmark.start_weeks exceeds the scenario horizon");
  }
  SamplerConfig sampler = config.sampler_for_run();
  const fs::path dir = output_dir(config);

  json m = manifest_header("benchmark");
  m["seeds"] = {{"master", seed}};
  m["parameters"] = seirs_echo(config.scenario);
  json failures = json::array();
  std::size_t flagged = 0;

  if (retro) {
    const auto result = batch_benchmark(bench.replicates, config.scenario, specs, sampler, seed,
                                        config.thresholds, config.jobs);
    write_file(dir / "metrics.csv", [&](std::ostream& f) { write_metrics(f, result.records); });
    write_file(dir / "metrics_summary.csv", [&](std::ostream& f) { write_metrics_summary(f, result.summary); });

    json data_seeds = json::array();
    for (std::size_t r = 0; r < bench.replicates; ++r) data_seeds.push_back(derive_seed(seed, "replicate", r));
    m["seeds"]["replicates"] = data_seeds;
    json fit_seeds = json::object();
    for (PriorKind k : bench.priors) {
      json s = json::array();
      for (std::size_t r = 0; r < bench.replicates; ++r) s.push_back(fit_seed(seed, k, r));
      fit_seeds[std::string(to_string(k))] = s;
    }
    m["seeds"]["fits"] = fit_seeds;

    json timing = json::object();
    for (const auto& s : result.summary) {
      timing[std::string(to_string(s.prior))] = timing_json(s.cpu_mean, s.cpu_min, s.cpu_max);
      flagged += s.flagged;
    }
    m["timing"]["retrospective"] = timing;
    for (const auto& r : result.records) {
      if (!r.failure.empty()) {
        failures.push_back({{"mode", "retrospective"}, {"replicate", r.replicate},
                            {"prior", std::string(to_string(r.prior))}, {"error", r.failure}});
      }
    }
    for (const auto& s : result.summary) {
      out << to_string(s.prior) << ": ";
      if (s.aggregate) {
        out << "envelope95 " << s.aggregate->mean.envelope_95 << ", MCIW95 " << s.aggregate->mean.mciw_95
            << ", MAD " << s.aggregate->mean.mad;
      } else {
        out << "no successful fits";
      }
      out << " (" << s.failed << " failed, " << s.flagged << " flagged)\n";
    }
  }

  if (realtime) {
    const Dataset data = make_dataset(config.scenario, seed, bench.realtime_replicate);
    m["seeds"]["realtime_replicate"] = data.seed;
    std::vector<RealtimeResult> results;
    json timing = json::object();
    json rt_seeds = json::object();
    for (const auto& spec : specs) {
      const std::string name(to_string(spec.prior));
      SamplerConfig sc = sampler;
      sc.seed = derive_seed(seed, "realtime/" + name);
      rt_seeds[name] = sc.seed;
      auto r = realtime_protocol(data.cases, data.truth.true_rt, spec, bench.start_weeks, sc,
                                 config.thresholds, config.jobs);
      write_file(dir / name / "realtime.csv", [&](std::ostream& f) { write_realtime(f, r); });
      write_file(dir / name / "realtime_diagnostics.csv",
                 [&](std::ostream& f) { write_realtime_diagnostics(f, r); });
      double lo = INFINITY, hi = 0.0, sum = 0.0;
      std::size_t n = 0;
      for (const auto& it : r.iterations) {
        if (!it.failure.empty()) {
          failures.push_back({{"mode", "realtime"}, {"T_prime", it.t_prime}, {"prior", name}, {"error", it.failure}});
          continue;
        }
        const double minutes = it.cpu_seconds / 60.0;
        lo = std::min(lo, minutes);
        hi = std::max(hi, minutes);
        sum += minutes;
        ++n;
      }
      timing[name] = n ? timing_json(sum / static_cast<double>(n), lo, hi) : json(nullptr);
      flagged += r.flagged();
      out << name << " realtime: " << r.iterations.size() << " iterations, " << r.flagged() << " flagged\n";
      results.push_back(std::move(r));
    }
    m["seeds"]["realtime_fits"] = rt_seeds;
    m["timing"]["realtime"] = timing;
    write_file(dir / "realtime_metrics.csv", [&](std::ostream& f) { write_realtime_metrics(f, results); });
  }

  m["failures"] = failures;
  m["flagged"] = flagged;
  const int code = !failures.empty() ? exit_runtime_failure : flagged ? exit_diagnostics_failure : exit_ok;
  m["exit_code"] = code;
  write_manifest(dir, config, m);
  out << "benchmark -> " << dir.string() << '\n';
  return code;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian R_t inference under five smoothing priors"};
  app.require_subcommand(1);
  Overrides o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Run config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Master seed");
    sub->add_option("--jobs", o.jobs, "Upper bound on concurrent chains or fits");
    sub->add_option("--output-dir", o.output_dir, "Directory for outputs");
  };
  auto* fit = app.add_subcommand("fit", "Fit one prior to a weekly case CSV");
  common(fit);
  fit->add_option("--prior", o.priors, "rw1, ou, rw2, ibm or hsgp")->expected(1);
  fit->add_flag("--save-draws", o.save_draws, "Also write draws.csv");

  auto* sim = app.add_subcommand("simulate", "Simulate a SEIRS outbreak and observed cases");
  common(sim);

  auto* bench = app.add_subcommand("benchmark", "Retrospective and real-time benchmark on SEIRS data");
  common(bench);
  bench->add_option("--prior", o.priors, "Priors to compare (repeat or comma-separate)")->delimiter(',');
  bench->add_flag("--realtime", o.realtime, "Run the real-time protocol");
  bench->add_option("--start-weeks", o.start_weeks, "Weeks in the first real-time fit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_config_error;
  }

  try {
    if (fit->parsed()) return cmd_fit(o, out);
    if (sim->parsed()) return cmd_simulate(o, out);
    return cmd_benchmark(o, out);
  } catch (const DiagnosticsFailure& e) {
    err << "diagnostics failure: " << e.what() << '\n';
    return exit_diagnostics_failure;
  } catch (const Error& e) {
    err << e.what() << '\n';
    return e.code() == ErrorCode::config_error ? exit_config_error : exit_runtime_failure;
  } catch (const std::exception& e) {
    err << "runtime failure: " << e.what() << '\n';
    return exit_runtime_failure;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"gmrt"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace gmrt
