#include "gmrt/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "gmrt/core.hpp"
#include "gmrt/error.hpp"

namespace gmrt {

namespace {

using Chains = std::vector<std::vector<double>>;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_shape(const Chains& chains) {
  if (chains.empty()) throw Error(ErrorCode::empty_sample, "no chains");
  const std::size_t n = chains.front().size();
  if (n < 4) throw Error(ErrorCode::empty_sample, "need at least 4 draws per chain");
  for (const auto& c : chains) {
    if (c.size() != n) throw Error(ErrorCode::alignment_error, "chains differ in length");
  }
}

// Halves each chain, dropping the middle draw of odd-length chains.
Chains split(const Chains& chains) {
  Chains out;
  out.reserve(2 * chains.size());
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    out.emplace_back(c.begin(), c.begin() + static_cast<long>(half));
    out.emplace_back(c.end() - static_cast<long>(half), c.end());
  }
  return out;
}

bool all_equal(const Chains& chains) {
  const double first = chains.front().front();
  for (const auto& c : chains) {
    for (double v : c) {
      if (v != first) return false;
    }
  }
  return true;
}

bool any_nonfinite(const Chains& chains) {
  for (const auto& c : chains) {
    for (double v : c) {
      if (!std::isfinite(v)) return true;
    }
  }
  return false;
}

// Normal scores of average ranks over all draws jointly.
Chains rank_normalize(const Chains& chains) {
  std::vector<std::pair<double, std::size_t>> flat;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (std::size_t i = 0; i < chains[c].size(); ++i) flat.emplace_back(chains[c][i], flat.size());
  }
  const std::size_t s = flat.size();
  std::vector<std::size_t> order(s);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return flat[a].first < flat[b].first; });
  std::vector<double> rank(s);
  for (std::size_t i = 0; i < s;) {
    std::size_t j = i;
    while (j + 1 < s && flat[order[j + 1]].first == flat[order[i]].first) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  const boost::math::normal_distribution<double> std_normal;
  Chains out = chains;
  std::size_t k = 0;
  for (auto& c : out) {
    for (double& v : c) {
      v = boost::math::quantile(std_normal, (rank[k++] - 0.375) / (static_cast<double>(s) + 0.25));
    }
  }
  return out;
}

Chains fold(const Chains& chains) {
  std::vector<double> all;
  for (const auto& c : chains) all.insert(all.end(), c.begin(), c.end());
  const double med = weighted_quantile(all, 0.5);
  Chains out = chains;
  for (auto& c : out) {
    for (double& v : c) v = std::abs(v - med);
  }
  return out;
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

// Classic potential scale reduction over already-split chains.
double rhat_of(const Chains& chains) {
  const double n = static_cast<double>(chains.front().size());
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    means.push_back(mean(c));
    vars.push_back(sample_variance(c));
  }
  const double w = mean(vars);
  const double b_over_n = chains.size() > 1 ? sample_variance(means) : 0.0;
  if (!(w > 0.0)) return kNaN;
  const double var_plus = (n - 1.0) / n * w + b_over_n;
  return std::sqrt(var_plus / w);
}

double autocov(const std::vector<double>& x, double m, std::size_t lag) {
  const std::size_t n = x.size();
  double s = 0.0;
  for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - m) * (x[i + lag] - m);
  return s / static_cast<double>(n);
}

double ess_of(const Chains& chains) {
  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  std::vector<double> means(m), var(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = mean(chains[c]);
    var[c] = autocov(chains[c], means[c], 0) * static_cast<double>(n) / static_cast<double>(n - 1);
  }
  const double mean_var = mean(var);
  double var_plus = mean_var * static_cast<double>(n - 1) / static_cast<double>(n);
  if (m > 1) var_plus += sample_variance(means);
  if (!(var_plus > 0.0)) return kNaN;

  auto rho = [&](std::size_t lag) {
    double acov = 0.0;
    for (std::size_t c = 0; c < m; ++c) acov += autocov(chains[c], means[c], lag);
    acov /= static_cast<double>(m);
    return 1.0 - (mean_var - acov) / var_plus;
  };

  std::vector<double> rho_hat(n, 0.0);
  double even = 1.0;
  double odd = rho(1);
  rho_hat[0] = even;
  rho_hat[1] = odd;
  std::size_t t = 0;
  while (t + 5 < n && std::isfinite(even + odd) && even + odd > 0.0) {
    t += 2;
    even = rho(t);
    odd = rho(t + 1);
    if (even + odd >= 0.0) {
      rho_hat[t] = even;
      rho_hat[t + 1] = odd;
    }
  }
  const std::size_t max_t = t;
  if (even > 0.0) rho_hat[max_t] = even;

  // initial monotone sequence
  for (std::size_t k = 1; k + 4 <= max_t; k += 2) {
    const double prev = rho_hat[k - 1] + rho_hat[k];
    if (rho_hat[k + 1] + rho_hat[k + 2] > prev) {
      rho_hat[k + 1] = prev / 2.0;
      rho_hat[k + 2] = prev / 2.0;
    }
  }

  const double total = static_cast<double>(m * n);
  double tau = -1.0 + 2.0 * std::accumulate(rho_hat.begin(), rho_hat.begin() + static_cast<long>(max_t), 0.0) +
               rho_hat[max_t];
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

}  // namespace

double split_rhat(const Chains& chains) {
  check_shape(chains);
  if (any_nonfinite(chains) || all_equal(chains)) return kNaN;
  const Chains s = split(chains);
  const double bulk = rhat_of(rank_normalize(s));
  const double tail = rhat_of(rank_normalize(fold(s)));
  if (std::isnan(tail)) return bulk;
  return std::max(bulk, tail);
}

double ess_bulk(const Chains& chains) {
  check_shape(chains);
  if (any_nonfinite(chains) || all_equal(chains)) return kNaN;
  return ess_of(rank_normalize(split(chains)));
}

double split_rhat_raw(const Chains& chains) {
  check_shape(chains);
  if (any_nonfinite(chains) || all_equal(chains)) return kNaN;
  return rhat_of(split(chains));
}

double ess_raw(const Chains& chains) {
  check_shape(chains);
  if (any_nonfinite(chains) || all_equal(chains)) return kNaN;
  return ess_of(split(chains));
}

int DiagnosticReport::total_divergences() const {
  return std::accumulate(divergences.begin(), divergences.end(), 0);
}

std::vector<std::string> DiagnosticReport::violations() const {
  std::vector<std::string> out;
  for (const auto& p : parameters) {
    if (!p.ok) out.push_back(p.name);
  }
  return out;
}

DiagnosticReport diagnose(const PosteriorDraws& draws, const Thresholds& thresholds) {
  DiagnosticReport r;
  r.thresholds = thresholds;
  r.max_rhat = -std::numeric_limits<double>::infinity();
  r.min_ess = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < draws.outputs(); ++p) {
    const auto chains = draws.by_chain(p);
    ParameterDiagnostic d;
    d.name = draws.names[p];
    d.rhat = split_rhat(chains);
    d.ess = ess_bulk(chains);
    d.degenerate = std::isnan(d.rhat) || std::isnan(d.ess);
    d.ok = !d.degenerate && d.rhat < thresholds.max_rhat && d.ess > thresholds.min_ess;
    if (!d.degenerate) {
      r.max_rhat = std::max(r.max_rhat, d.rhat);
      r.min_ess = std::min(r.min_ess, d.ess);
    }
    r.parameters.push_back(std::move(d));
  }
  for (const auto& c : draws.chains) {
    r.divergences.push_back(c.divergences);
    r.treedepth_hits.push_back(c.treedepth_hits);
    r.step_sizes.push_back(c.step_size);
  }
  r.cpu_seconds = draws.cpu_seconds();
  return r;
}

}  // namespace gmrt
