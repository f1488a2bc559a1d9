#include "gmrt/config.hpp"

#include <fstream>
#include <type_traits>

#include "gmrt/error.hpp"

namespace gmrt {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::config_error, msg); }

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail((path.empty() ? "config" : path) + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) fail("unknown key " + join(path, key));
  }
}

template <class T>
T convert(const json& v, const std::string& where) {
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) fail(where + ": expected true or false");
    return v.get<bool>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) fail(where + ": expected a string");
    return v.get<std::string>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) fail(where + ": expected a number");
    return v.get<T>();
  } else if constexpr (std::is_unsigned_v<T>) {
    if (!v.is_number_unsigned()) fail(where + ": expected a non-negative integer");
    return v.get<T>();
  } else {
    static_assert(std::is_integral_v<T>);
    if (!v.is_number_integer()) fail(where + ": expected an integer");
    return v.get<T>();
  }
}

template <class T>
void read(const json& obj, const char* key, const std::string& path, T& out) {
  const auto it = obj.find(key);
  if (it != obj.end()) out = convert<T>(*it, join(path, key));
}

template <class T>
void read(const json& obj, const char* key, const std::string& path, std::optional<T>& out) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return;
  out = convert<T>(*it, join(path, key));
}

const json* child(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

template <class Fn>
void wrap(const std::string& what, Fn fn) {
  try {
    fn();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::config_error) throw;
    fail(what + ": " + e.what());
  }
}

// --- hyperpriors ----------------------------------------------------------------

void parse_prior(const json& j, const std::string& p, LogNormalPrior& out) {
  check_keys(j, p, {"meanlog", "sdlog"});
  read(j, "meanlog", p, out.meanlog);
  read(j, "sdlog", p, out.sdlog);
}
void parse_prior(const json& j, const std::string& p, TruncatedNormalPrior& out) {
  check_keys(j, p, {"loc", "scale", "lower"});
  read(j, "loc", p, out.loc);
  read(j, "scale", p, out.scale);
  read(j, "lower", p, out.lower);
}
void parse_prior(const json& j, const std::string& p, ExponentialPrior& out) {
  check_keys(j, p, {"rate"});
  read(j, "rate", p, out.rate);
}
void parse_prior(const json& j, const std::string& p, GammaPrior& out) {
  check_keys(j, p, {"shape", "rate"});
  read(j, "shape", p, out.shape);
  read(j, "rate", p, out.rate);
}
void parse_prior(const json& j, const std::string& p, NormalPrior& out) {
  check_keys(j, p, {"mean", "sd"});
  read(j, "mean", p, out.mean);
  read(j, "sd", p, out.sd);
}

json prior_json(const LogNormalPrior& p) { return {{"meanlog", p.meanlog}, {"sdlog", p.sdlog}}; }
json prior_json(const TruncatedNormalPrior& p) {
  return {{"loc", p.loc}, {"scale", p.scale}, {"lower", p.lower}};
}
json prior_json(const ExponentialPrior& p) { return {{"rate", p.rate}}; }
json prior_json(const GammaPrior& p) { return {{"shape", p.shape}, {"rate", p.rate}}; }
json prior_json(const NormalPrior& p) { return {{"mean", p.mean}, {"sd", p.sd}}; }

template <class F>
void for_each_hyper(HyperPriorSpec& h, F f) {
  f("rho", h.rho);
  f("kappa", h.kappa);
  f("nu", h.nu);
  f("lambda", h.lambda);
  f("log_r1", h.log_r1);
  f("sigma_rw1", h.sigma_rw1);
  f("sigma_ou", h.sigma_ou);
  f("theta_ou", h.theta_ou);
  f("sigma_rw2", h.sigma_rw2);
  f("sigma_ibm", h.sigma_ibm);
  f("alpha_hsgp", h.alpha_hsgp);
  f("ell_hsgp", h.ell_hsgp);
}

void parse_hyper(const json& j, const std::string& p, HyperPriorSpec& h) {
  check_keys(j, p, {"rho", "kappa", "nu", "lambda", "log_r1", "ibm_initial_slope_mean", "sigma_rw1",
                    "sigma_ou", "theta_ou", "sigma_rw2", "sigma_ibm", "alpha_hsgp", "ell_hsgp"});
  for_each_hyper(h, [&](const char* key, auto& prior) {
    if (const json* c = child(j, key)) parse_prior(*c, join(p, key), prior);
  });
  read(j, "ibm_initial_slope_mean", p, h.ibm_initial_slope_mean);
}

json hyper_json(HyperPriorSpec h) {
  json j = json::object();
  for_each_hyper(h, [&](const char* key, auto& prior) { j[key] = prior_json(prior); });
  j["ibm_initial_slope_mean"] = h.ibm_initial_slope_mean;
  return j;
}

// --- sections -------------------------------------------------------------------

GammaPmfConfig parse_pmf(const json& j, const std::string& p) {
  check_keys(j, p, {"mean_days", "sd_days", "max_lags"});
  if (!j.contains("mean_days")) fail("missing required key " + join(p, "mean_days"));
  if (!j.contains("sd_days")) fail("missing required key " + join(p, "sd_days"));
  GammaPmfConfig c;
  read(j, "mean_days", p, c.mean_days);
  read(j, "sd_days", p, c.sd_days);
  read(j, "max_lags", p, c.max_lags);
  if (!(c.mean_days > 0.0) || !(c.sd_days > 0.0)) fail(p + ": mean_days and sd_days must be positive");
  if (c.max_lags && *c.max_lags < 1) fail(join(p, "max_lags") + " must be >= 1");
  return c;
}

json pmf_json(const GammaPmfConfig& c) {
  json j = {{"mean_days", c.mean_days}, {"sd_days", c.sd_days}};
  j["max_lags"] = c.max_lags ? json(*c.max_lags) : json(nullptr);
  return j;
}

void parse_model(const json& j, RunConfig& c) {
  const std::string p = "model";
  check_keys(j, p, {"prior", "generation", "delay", "step_days", "hyperpriors", "hsgp_ell_ref"});
  if (const json* v = child(j, "prior")) {
    const auto name = convert<std::string>(*v, "model.prior");
    wrap("model.prior", [&] { c.prior = parse_prior_kind(name); });
  }
  if (const json* v = child(j, "generation"); v && !v->is_null()) c.generation = parse_pmf(*v, "model.generation");
  if (const json* v = child(j, "delay"); v && !v->is_null()) c.delay = parse_pmf(*v, "model.delay");
  read(j, "step_days", p, c.step_days);
  if (!(c.step_days > 0.0)) fail("model.step_days must be positive");
  if (const json* v = child(j, "hyperpriors")) parse_hyper(*v, "model.hyperpriors", c.hyper);
  wrap("model.hyperpriors", [&] { validate(c.hyper); });
  read(j, "hsgp_ell_ref", p, c.hsgp_ell_ref);
  if (c.hsgp_ell_ref && !(*c.hsgp_ell_ref > 0.0)) fail("model.hsgp_ell_ref must be positive");
}

void parse_sampler(const json& j, SamplerConfig& s) {
  const std::string p = "sampler";
  check_keys(j, p, {"chains", "warmup", "iters", "max_treedepth", "target_accept", "divergence_threshold",
                    "init_attempts"});
  read(j, "chains", p, s.chains);
  read(j, "warmup", p, s.warmup);
  read(j, "iters", p, s.iters);
  read(j, "max_treedepth", p, s.max_treedepth);
  read(j, "target_accept", p, s.target_accept);
  read(j, "divergence_threshold", p, s.divergence_threshold);
  read(j, "init_attempts", p, s.init_attempts);
  wrap("sampler", [&] { validate(s); });
}

void parse_scenario(const json& j, Scenario& sc) {
  const std::string p = "scenario";
  check_keys(j, p, {"population", "initial_infectious", "initial_exposed", "beta_knots", "r0_knots",
                    "sigma_latent", "gamma_infectious", "omega", "horizon", "dt", "rho", "kappa"});
  auto& s = sc.seirs;
  read(j, "population", p, s.population);
  read(j, "initial_infectious", p, s.initial_infectious);
  read(j, "initial_exposed", p, s.initial_exposed);
  read(j, "sigma_latent", p, s.sigma_latent);
  read(j, "gamma_infectious", p, s.gamma_infectious);
  read(j, "omega", p, s.omega);
  read(j, "horizon", p, s.horizon);
  read(j, "dt", p, sc.dt);
  read(j, "rho", p, sc.rho);
  read(j, "kappa", p, sc.kappa);

  const json* beta = child(j, "beta_knots");
  const json* r0 = child(j, "r0_knots");
  if (beta && r0) fail("scenario: give beta_knots or r0_knots, not both");
  if (beta || r0) {
    const json& knots = beta ? *beta : *r0;
    const std::string where = beta ? "scenario.beta_knots" : "scenario.r0_knots";
    if (!knots.is_array()) fail(where + ": expected an array of [week, value] pairs");
    s.beta.clear();
    for (std::size_t i = 0; i < knots.size(); ++i) {
      const auto& k = knots[i];
      const std::string at = where + "[" + std::to_string(i) + "]";
      if (!k.is_array() || k.size() != 2) fail(at + ": expected [week, value]");
      const double week = convert<double>(k[0], at);
      const double value = convert<double>(k[1], at);
      s.beta.push_back({week, beta ? value : value * s.gamma_infectious});
    }
  }
  wrap("scenario", [&] { validate(s); });
  if (!(sc.dt > 0.0) || sc.dt > 1.0 / 7.0 + 1e-12) fail("scenario.dt must lie in (0, 1/7] weeks");
  if (!(sc.rho > 0.0 && sc.rho < 1.0)) fail("scenario.rho must lie in (0, 1)");
  if (!(sc.kappa > 0.0)) fail("scenario.kappa must be positive");
}

BenchmarkMode parse_mode(const std::string& s) {
  if (s == "retrospective") return BenchmarkMode::retrospective;
  if (s == "realtime") return BenchmarkMode::realtime;
  if (s == "both") return BenchmarkMode::both;
  fail("benchmark.mode must be retrospective, realtime or both");
}

void parse_benchmark(const json& j, BenchmarkConfig& b) {
  const std::string p = "benchmark";
  check_keys(j, p, {"replicates", "priors", "mode", "start_weeks", "realtime_replicate"});
  read(j, "replicates", p, b.replicates);
  if (b.replicates < 1) fail("benchmark.replicates must be >= 1");
  if (const json* v = child(j, "priors")) {
    if (!v->is_array() || v->empty()) fail("benchmark.priors: expected a non-empty array");
    b.priors.clear();
    for (const auto& name : *v) {
      const auto s = convert<std::string>(name, "benchmark.priors");
      wrap("benchmark.priors", [&] { b.priors.push_back(parse_prior_kind(s)); });
    }
  }
  if (const json* v = child(j, "mode")) b.mode = parse_mode(convert<std::string>(*v, "benchmark.mode"));
  read(j, "start_weeks", p, b.start_weeks);
  if (b.start_weeks < 2) fail("benchmark.start_weeks must be >= 2");
  read(j, "realtime_replicate", p, b.realtime_replicate);
}

}  // namespace

std::string_view to_string(BenchmarkMode mode) noexcept {
  switch (mode) {
    case BenchmarkMode::retrospective: return "retrospective";
    case BenchmarkMode::realtime: return "realtime";
    case BenchmarkMode::both: return "both";
  }
  return "?";
}

ModelSpec RunConfig::model_spec(PriorKind kind) const {
  if (!generation) fail("missing required key model.generation");
  if (!delay) fail("missing required key model.delay");
  ModelSpec spec;
  spec.prior = kind;
  spec.hyper = hyper;
  spec.hsgp_ell_ref = hsgp_ell_ref;
  wrap("model.generation", [&] {
    spec.generation = discretize_gamma(generation->mean_days, generation->sd_days, step_days,
                                       generation->max_lags, PmfKind::generation);
  });
  wrap("model.delay", [&] {
    spec.delay = discretize_gamma(delay->mean_days, delay->sd_days, step_days, delay->max_lags,
                                  PmfKind::delay);
  });
  return spec;
}

std::filesystem::path RunConfig::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : base_dir / p;
}

SamplerConfig RunConfig::sampler_for_run() const {
  SamplerConfig s = sampler;
  s.seed = seed.value_or(1);
  s.jobs = jobs;
  return s;
}

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  check_keys(doc, "", {"seed", "jobs", "data", "model", "sampler", "scenario", "benchmark", "thresholds",
                       "output", "manifest"});
  RunConfig c;
  c.base_dir = base_dir;
  read(doc, "seed", "", c.seed);
  read(doc, "jobs", "", c.jobs);
  if (c.jobs < 1) fail("jobs must be >= 1");

  if (const json* d = child(doc, "data")) {
    check_keys(*d, "data", {"cases_csv"});
    read(*d, "cases_csv", "data", c.cases_csv);
  }
  if (const json* m = child(doc, "model")) parse_model(*m, c);
  if (const json* s = child(doc, "sampler")) parse_sampler(*s, c.sampler);
  if (const json* s = child(doc, "scenario")) parse_scenario(*s, c.scenario);
  if (const json* b = child(doc, "benchmark")) parse_benchmark(*b, c.benchmark);
  if (const json* t = child(doc, "thresholds")) {
    check_keys(*t, "thresholds", {"max_rhat", "min_ess"});
    read(*t, "max_rhat", "thresholds", c.thresholds.max_rhat);
    read(*t, "min_ess", "thresholds", c.thresholds.min_ess);
    if (!(c.thresholds.max_rhat > 1.0) || !(c.thresholds.min_ess > 0.0)) {
      fail("thresholds: max_rhat must exceed 1 and min_ess must be positive");
    }
  }
  if (const json* o = child(doc, "output")) {
    check_keys(*o, "output", {"dir", "save_draws"});
    read(*o, "dir", "output", c.output_dir);
    read(*o, "save_draws", "output", c.save_draws);
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    fail(path.string() + ": " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

json to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
  j["jobs"] = c.jobs;
  j["data"] = {{"cases_csv", c.cases_csv ? json(c.resolve(*c.cases_csv).string()) : json(nullptr)}};

  json model;
  model["prior"] = std::string(to_string(c.prior));
  model["generation"] = c.generation ? pmf_json(*c.generation) : json(nullptr);
  model["delay"] = c.delay ? pmf_json(*c.delay) : json(nullptr);
  model["step_days"] = c.step_days;
  model["hyperpriors"] = hyper_json(c.hyper);
  model["hsgp_ell_ref"] = c.hsgp_ell_ref ? json(*c.hsgp_ell_ref) : json(nullptr);
  j["model"] = model;

  const auto& s = c.sampler;
  j["sampler"] = {{"chains", s.chains},
                  {"warmup", s.warmup},
                  {"iters", s.iters},
                  {"max_treedepth", s.max_treedepth},
                  {"target_accept", s.target_accept},
                  {"divergence_threshold", s.divergence_threshold},
                  {"init_attempts", s.init_attempts}};

  const auto& sc = c.scenario;
  json knots = json::array();
  for (const auto& k : sc.seirs.beta) knots.push_back({k.week, k.beta});
  j["scenario"] = {{"population", sc.seirs.population},
                   {"initial_infectious", sc.seirs.initial_infectious},
                   {"initial_exposed", sc.seirs.initial_exposed},
                   {"beta_knots", knots},
                   {"sigma_latent", sc.seirs.sigma_latent},
                   {"gamma_infectious", sc.seirs.gamma_infectious},
                   {"omega", sc.seirs.omega},
                   {"horizon", sc.seirs.horizon},
                   {"dt", sc.dt},
                   {"rho", sc.rho},
                   {"kappa", sc.kappa}};

  json priors = json::array();
  for (PriorKind k : c.benchmark.priors) priors.push_back(std::string(to_string(k)));
  j["benchmark"] = {{"replicates", c.benchmark.replicates},
                    {"priors", priors},
                    {"mode", std::string(to_string(c.benchmark.mode))},
                    {"start_weeks", c.benchmark.start_weeks},
                    {"realtime_replicate", c.benchmark.realtime_replicate}};
  j["thresholds"] = {{"max_rhat", c.thresholds.max_rhat}, {"min_ess", c.thresholds.min_ess}};
  j["output"] = {{"dir", c.output_dir}, {"save_draws", c.save_draws}};
  return j;
}

}  // namespace gmrt
