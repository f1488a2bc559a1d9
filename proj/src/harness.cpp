#include "gmrt/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <ostream>
#include <thread>

#include "json.hpp"

#include "gmrt/error.hpp"

namespace gmrt {

namespace {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results are written by
// index, so the schedule never affects output.
template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::string num(double v) {
  if (!std::isfinite(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string num17(double v) {
  if (!std::isfinite(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json jnum(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

// Free text in a CSV cell without quoting.
std::string csv_text(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

bool is_path_output(const std::string& name) { return name.find('[') != std::string::npos; }

}  // namespace

std::vector<ParamSummary> summarize_params(const PosteriorDraws& draws) {
  static constexpr double kLevels[] = {0.5, 0.025, 0.975};
  std::vector<ParamSummary> out;
  for (std::size_t p = 0; p < draws.outputs(); ++p) {
    if (is_path_output(draws.names[p])) continue;
    const auto q = quantiles(draws.pooled(p), kLevels);
    out.push_back({draws.names[p], q[0], q[1], q[2]});
  }
  return out;
}

FitResult fit_model(const ModelSpec& spec, const CaseSeries& cases, const SamplerConfig& sampler,
                    const Thresholds& thresholds) {
  const RenewalPosterior posterior(spec, cases);
  FitResult r;
  r.prior = spec.prior;
  r.draws = nuts_sample(posterior, sampler);
  r.diagnostics = diagnose(r.draws, thresholds);
  r.rt = RtPosteriorSummary::from_draws(r.draws, cases.size());
  r.params = summarize_params(r.draws);
  return r;
}

Dataset make_dataset(const Scenario& scenario, std::uint64_t master_seed, std::size_t index) {
  Dataset d{{}, CaseSeries::from_counts({0, 0}), derive_seed(master_seed, "replicate", index)};
  d.truth = simulate_seirs(scenario.seirs, d.seed, scenario.dt);
  d.cases = observe_cases(d.truth, scenario.rho, scenario.kappa, d.seed);
  return d;
}

std::size_t RealtimeResult::flagged() const {
  return static_cast<std::size_t>(std::count_if(iterations.begin(), iterations.end(),
                                                 [](const auto& it) { return !it.diagnostics_ok; }));
}

MetricReport realtime_metrics(const std::vector<RealtimeIteration>& iterations) {
  std::vector<std::array<double, 7>> rows;
  std::vector<double> truth;
  std::vector<Interval> i95, i80;
  for (const auto& it : iterations) {
    if (!it.failure.empty()) continue;
    rows.push_back(it.quantiles);
    truth.push_back(it.true_rt);
    i95.push_back({it.quantiles[1], it.quantiles[5]});
    i80.push_back({it.quantiles[2], it.quantiles[4]});
  }
  MetricReport m = compute_metrics(RtPosteriorSummary(std::move(rows)), truth);
  m.decision_score_95 = decision_score(i95, truth);
  m.decision_score_80 = decision_score(i80, truth);
  double cpu = 0.0;
  for (const auto& it : iterations) cpu += it.cpu_seconds;
  m.cpu_minutes = cpu / 60.0;
  return m;
}

RealtimeResult realtime_protocol(const CaseSeries& cases, std::span<const double> truth,
                                 const ModelSpec& spec, std::size_t start_weeks,
                                 const SamplerConfig& sampler, const Thresholds& thresholds, int jobs) {
  if (truth.size() != cases.size()) throw Error(ErrorCode::alignment_error, "truth and cases differ in length");
  if (start_weeks < 2 || start_weeks > cases.size()) {
    throw Error(ErrorCode::invalid_parameter, "start_weeks must lie in [2, T]");
  }
  RealtimeResult r;
  r.prior = spec.prior;
  const std::size_t n = cases.size() - start_weeks + 1;
  r.iterations.resize(n);
  SamplerConfig sc = sampler;
  sc.jobs = 1;
  parallel_for(n, jobs, [&](std::size_t i) {
    auto& it = r.iterations[i];
    it.t_prime = start_weeks + i;
    it.true_rt = truth[it.t_prime - 1];
    try {
      const auto fit = fit_model(spec, cases.truncated(it.t_prime), sc, thresholds);
      it.quantiles = fit.rt.row(it.t_prime - 1);
      it.diagnostics_ok = fit.diagnostics.passed();
      it.max_rhat = fit.diagnostics.max_rhat;
      it.min_ess = fit.diagnostics.min_ess;
      it.divergences = fit.diagnostics.total_divergences();
      it.cpu_seconds = fit.draws.cpu_seconds();
    } catch (const std::exception& e) {
      it.failure = e.what();
    }
  });
  const bool any_ok = std::any_of(r.iterations.begin(), r.iterations.end(),
                                  [](const auto& it) { return it.failure.empty(); });
  if (any_ok) r.metrics = realtime_metrics(r.iterations);
  return r;
}

std::uint64_t fit_seed(std::uint64_t master, PriorKind prior, std::size_t replicate) {
  return derive_seed(master, "fit/" + std::string(to_string(prior)), replicate);
}

std::vector<PriorSummary> summarize_records(const std::vector<ReplicateRecord>& records,
                                            const std::vector<PriorKind>& priors) {
  std::vector<PriorSummary> out;
  for (PriorKind k : priors) {
    PriorSummary s;
    s.prior = k;
    std::vector<MetricReport> ok;
    std::vector<double> cpu;
    for (const auto& rec : records) {
      if (rec.prior != k) continue;
      if (!rec.failure.empty() || !rec.metrics) {
        ++s.failed;
        continue;
      }
      if (!rec.diagnostics_ok) ++s.flagged;
      ok.push_back(*rec.metrics);
      cpu.push_back(rec.cpu_seconds / 60.0);
    }
    if (!ok.empty()) {
      s.aggregate = aggregate(ok);
      s.cpu_min = *std::min_element(cpu.begin(), cpu.end());
      s.cpu_max = *std::max_element(cpu.begin(), cpu.end());
      double sum = 0.0;
      for (double c : cpu) sum += c;
      s.cpu_mean = sum / static_cast<double>(cpu.size());
    }
    out.push_back(std::move(s));
  }
  return out;
}

BenchmarkResult batch_benchmark(std::size_t n_replicates, const Scenario& scenario,
                                const std::vector<ModelSpec>& specs, const SamplerConfig& sampler,
                                std::uint64_t seed, const Thresholds& thresholds, int jobs) {
  if (n_replicates < 1) throw Error(ErrorCode::invalid_parameter, "need at least one replicate");
  if (specs.empty()) throw Error(ErrorCode::invalid_parameter, "need at least one model spec");
  validate(sampler);

  std::vector<std::optional<Dataset>> data(n_replicates);
  parallel_for(n_replicates, jobs, [&](std::size_t r) { data[r] = make_dataset(scenario, seed, r); });

  BenchmarkResult out;
  out.records.resize(n_replicates * specs.size());
  parallel_for(out.records.size(), jobs, [&](std::size_t task) {
    const std::size_t r = task / specs.size();
    const ModelSpec& spec = specs[task % specs.size()];
    auto& rec = out.records[task];
    rec.replicate = r;
    rec.prior = spec.prior;
    rec.data_seed = data[r]->seed;
    rec.sampler_seed = fit_seed(seed, spec.prior, r);
    SamplerConfig sc = sampler;
    sc.seed = rec.sampler_seed;
    sc.jobs = 1;
    try {
      const auto fit = fit_model(spec, data[r]->cases, sc, thresholds);
      MetricReport m = compute_metrics(fit.rt, data[r]->truth.true_rt);
      rec.cpu_seconds = fit.draws.cpu_seconds();
      m.cpu_minutes = rec.cpu_seconds / 60.0;
      rec.metrics = m;
      rec.diagnostics_ok = fit.diagnostics.passed();
      rec.max_rhat = fit.diagnostics.max_rhat;
      rec.min_ess = fit.diagnostics.min_ess;
      rec.divergences = fit.diagnostics.total_divergences();
    } catch (const std::exception& e) {
      rec.failure = e.what();
    }
  });

  std::vector<PriorKind> priors;
  for (const auto& s : specs) priors.push_back(s.prior);
  out.summary = summarize_records(out.records, priors);
  return out;
}

// --- writers --------------------------------------------------------------------

void write_rt_summary(std::ostream& out, const CaseSeries& cases, const RtPosteriorSummary& rt) {
  out << "week,date,q005,q025,q10,median,q90,q975,q995\n";
  for (std::size_t t = 0; t < rt.weeks(); ++t) {
    out << t + 1 << ',' << format_date(cases.date_at(t));
    for (double v : rt.row(t)) out << ',' << num(v);
    out << '\n';
  }
}

void write_params_summary(std::ostream& out, const std::vector<ParamSummary>& params) {
  out << "parameter,median,q025,q975\n";
  for (const auto& p : params) {
    out << p.name << ',' << num(p.median) << ',' << num(p.q025) << ',' << num(p.q975) << '\n';
  }
}

void write_draws(std::ostream& out, const PosteriorDraws& draws) {
  out << "chain,iteration,lp";
  for (const auto& n : draws.names) out << ',' << n;
  out << '\n';
  for (std::size_t c = 0; c < draws.chains.size(); ++c) {
    for (std::size_t it = 0; it < draws.iterations; ++it) {
      out << c + 1 << ',' << it + 1 << ',' << num17(draws.chains[c].log_density[it]);
      for (std::size_t p = 0; p < draws.outputs(); ++p) out << ',' << num17(draws.at(c, it, p));
      out << '\n';
    }
  }
}

void write_diagnostics_json(std::ostream& out, const FitResult& fit) {
  const auto& d = fit.diagnostics;
  nlohmann::json j;
  j["prior"] = std::string(to_string(fit.prior));
  j["passed"] = d.passed();
  j["thresholds"] = {{"max_rhat", d.thresholds.max_rhat}, {"min_ess", d.thresholds.min_ess}};
  j["max_rhat"] = jnum(d.max_rhat);
  j["min_ess"] = jnum(d.min_ess);
  j["divergences"] = d.divergences;
  j["total_divergences"] = d.total_divergences();
  j["treedepth_hits"] = d.treedepth_hits;
  j["step_sizes"] = d.step_sizes;
  j["cpu_minutes"] = d.cpu_seconds / 60.0;
  j["violations"] = d.violations();
  auto& params = j["parameters"] = nlohmann::json::array();
  for (const auto& p : d.parameters) {
    params.push_back({{"name", p.name}, {"rhat", jnum(p.rhat)}, {"ess_bulk", jnum(p.ess)},
                      {"degenerate", p.degenerate}});
  }
  out << j.dump(2) << '\n';
}

void write_metrics(std::ostream& out, const std::vector<ReplicateRecord>& records) {
  out << "replicate,prior,envelope_95,envelope_80,mad,mciw_95,mciw_80,diagnostics_ok,max_rhat,"
         "min_ess,divergences,data_seed,sampler_seed,failure\n";
  for (const auto& r : records) {
    out << r.replicate << ',' << to_string(r.prior) << ',';
    if (r.metrics) {
      const auto& m = *r.metrics;
      out << num(m.envelope_95) << ',' << num(m.envelope_80) << ',' << num(m.mad) << ','
          << num(m.mciw_95) << ',' << num(m.mciw_80);
    } else {
      out << "NA,NA,NA,NA,NA";
    }
    out << ',' << (r.diagnostics_ok ? 1 : 0) << ',' << num(r.max_rhat) << ',' << num(r.min_ess) << ','
        << r.divergences << ',' << r.data_seed << ',' << r.sampler_seed << ',' << csv_text(r.failure) << '\n';
  }
}

void write_metrics_summary(std::ostream& out, const std::vector<PriorSummary>& summary) {
  out << "prior,envelope_95_mean,envelope_95_sd,envelope_80_mean,envelope_80_sd,mad_mean,mad_sd,"
         "mciw_95_mean,mciw_95_sd,mciw_80_mean,mciw_80_sd,n_ok,n_failed,n_flagged\n";
  for (const auto& s : summary) {
    out << to_string(s.prior);
    if (s.aggregate) {
      const auto& m = s.aggregate->mean;
      const auto& sd = s.aggregate->sd;
      for (auto [a, b] : {std::pair{m.envelope_95, sd.envelope_95}, {m.envelope_80, sd.envelope_80},
                          {m.mad, sd.mad}, {m.mciw_95, sd.mciw_95}, {m.mciw_80, sd.mciw_80}}) {
        out << ',' << num(a) << ',' << num(b);
      }
      out << ',' << s.aggregate->count;
    } else {
      out << ",NA,NA,NA,NA,NA,NA,NA,NA,NA,NA,0";
    }
    out << ',' << s.failed << ',' << s.flagged << '\n';
  }
}

void write_realtime(std::ostream& out, const RealtimeResult& result) {
  out << "T_prime,median,q10,q90,q025,q975,true_rt\n";
  for (const auto& it : result.iterations) {
    out << it.t_prime << ',';
    if (it.failure.empty()) {
      const auto& q = it.quantiles;
      out << num(q[3]) << ',' << num(q[2]) << ',' << num(q[4]) << ',' << num(q[1]) << ',' << num(q[5]);
    } else {
      out << "NA,NA,NA,NA,NA";
    }
    out << ',' << num(it.true_rt) << '\n';
  }
}

void write_realtime_diagnostics(std::ostream& out, const RealtimeResult& result) {
  out << "T_prime,diagnostics_ok,max_rhat,min_ess,divergences,failure\n";
  for (const auto& it : result.iterations) {
    out << it.t_prime << ',' << (it.diagnostics_ok ? 1 : 0) << ',' << num(it.max_rhat) << ','
        << num(it.min_ess) << ',' << it.divergences << ',' << csv_text(it.failure) << '\n';
  }
}

void write_realtime_metrics(std::ostream& out, const std::vector<RealtimeResult>& results) {
  out << "prior,coverage_95,coverage_80,mad,mciw_95,mciw_80,decision_score_95,decision_score_80,"
         "iterations,flagged\n";
  for (const auto& r : results) {
    out << to_string(r.prior);
    if (r.metrics) {
      const auto& m = *r.metrics;
      out << ',' << num(m.envelope_95) << ',' << num(m.envelope_80) << ',' << num(m.mad) << ','
          << num(m.mciw_95) << ',' << num(m.mciw_80) << ',' << num(m.decision_score_95.value_or(NAN))
          << ',' << num(m.decision_score_80.value_or(NAN));
    } else {
      out << ",NA,NA,NA,NA,NA,NA,NA";
    }
    out << ',' << r.iterations.size() << ',' << r.flagged() << '\n';
  }
}

void write_simulation(std::ostream& out, const OutbreakTruth& truth, const CaseSeries& cases) {
  if (cases.size() != truth.weeks()) throw Error(ErrorCode::alignment_error, "cases and truth differ in length");
  out << "week,S,E,I,R,e2i,true_rt,cases\n";
  for (std::size_t w = 0; w < truth.weeks(); ++w) {
    const auto& s = truth.week_start[w];
    out << w + 1 << ',' << s.s << ',' << s.e << ',' << s.i << ',' << s.r << ',' << truth.e2i[w] << ','
        << num(truth.true_rt[w]) << ',' << cases[w] << '\n';
  }
}

}  // namespace gmrt
