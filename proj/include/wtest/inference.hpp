#pragma once

// One- and two-sample goodness-of-fit tests built on the multiplier
// bootstrap, plus the confidence interval, the parameter-budget check and the
// simulation diagnostics (Q-Q reference values, anti-concentration table).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "wtest/bootstrap.hpp"
#include "wtest/datagen.hpp"
#include "wtest/dual.hpp"
#include "wtest/error.hpp"
#include "wtest/nn.hpp"
#include "wtest/parallel.hpp"
#include "wtest/random.hpp"
#include "wtest/sample.hpp"
#include "wtest/transport.hpp"

namespace wtest {

enum class Decision { Accept, Reject };

inline std::string to_string(Decision d) { return d == Decision::Reject ? "Reject" : "Accept"; }

struct TestReport {
  double statistic = 0.0;
  double raw_distance = 0.0;
  double scaling = 0.0;
  double quantile = 0.0;
  double alpha = 0.0;
  Decision decision = Decision::Accept;
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<std::size_t> S;
  std::size_t T = 0;
  std::uint64_t seed = 0;
  std::string config_digest;
  double p_value = 0.0;  // fraction of draws >= statistic; diagnostic only
};

struct TwoSampleQuantile {
  std::vector<double> r_grid;
  std::vector<double> per_r_values;
  double q_breve = 0.0;
  double lambda = 0.0;
  double rho = 0.0;
};

struct TwoSampleResult {
  TestReport report;
  TwoSampleQuantile quantile;
};

struct TestOptions {
  std::size_t T = 200;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  bool warm_start = false;  // start bootstrap draws from the dual critic
  std::string config_digest;
};

inline std::vector<double> default_r_grid() {
  std::vector<double> grid;
  for (int k = 1; k <= 19; ++k) grid.push_back(0.05 * k);
  return grid;
}

namespace detail {

inline void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
}

inline double exceedance_fraction(const std::vector<double>& sorted, double value) {
  const auto it = std::lower_bound(sorted.begin(), sorted.end(), value);
  return static_cast<double>(sorted.end() - it) / static_cast<double>(sorted.size());
}

inline TrainConfig seeded(TrainConfig cfg, std::uint64_t seed, std::string_view tag) {
  cfg.seed = derive_seed(seed, tag);
  return cfg;
}

}  // namespace detail

/// Test of H0: mu = mu0, with mu0 represented by the reference sample `ref`.
/// Rejects when sqrt(n/S) W_hat(mu_n, mu0) >= q(1 - alpha).
inline TestReport one_sample_test(const Sample& x, const Sample& ref, double alpha,
                                  const TrainConfig& cfg, const TestOptions& opts) {
  require_same_dim(x, ref);
  detail::check_alpha(alpha);
  cfg.validate();

  const DualEstimate dual = train_dual_critic(x, ref, detail::seeded(cfg, opts.seed, "dual"));
  BootstrapOptions bopts{opts.threads, opts.warm_start ? &dual.net : nullptr};
  const BootstrapDraws draws = run_bootstrap(x, opts.T, cfg, derive_seed(opts.seed, "bootstrap"), bopts);

  TestReport r;
  r.n = x.n();
  r.m = ref.n();
  r.S = {draws.S};
  r.T = opts.T;
  r.seed = opts.seed;
  r.alpha = alpha;
  r.config_digest = opts.config_digest;
  r.raw_distance = dual.value;
  r.scaling = std::sqrt(static_cast<double>(r.n) / static_cast<double>(draws.S));
  r.statistic = r.scaling * r.raw_distance;
  r.quantile = empirical_quantile(draws, 1.0 - alpha);
  r.decision = r.statistic >= r.quantile ? Decision::Reject : Decision::Accept;
  r.p_value = detail::exceedance_fraction(draws.draws, r.statistic);
  return r;
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// sqrt(S/n) times the alpha/2 and 1 - alpha/2 bootstrap quantiles, sorted
/// ascending, with the lower end clamped at 0.
inline Interval interval_from_draws(const BootstrapDraws& draws, double alpha) {
  detail::check_alpha(alpha);
  const double back = std::sqrt(static_cast<double>(draws.S) / static_cast<double>(draws.n));
  double a = back * empirical_quantile(draws, alpha / 2.0);
  double b = back * empirical_quantile(draws, 1.0 - alpha / 2.0);
  if (a > b) std::swap(a, b);
  return Interval{std::max(a, 0.0), std::max(b, 0.0)};
}

inline Interval confidence_interval(const Sample& x, const Sample& ref, double alpha,
                                    const TrainConfig& cfg, const TestOptions& opts) {
  require_same_dim(x, ref);
  detail::check_alpha(alpha);
  cfg.validate();
  BootstrapOptions bopts{opts.threads, nullptr};
  DualEstimate dual;
  if (opts.warm_start) {
    dual = train_dual_critic(x, ref, detail::seeded(cfg, opts.seed, "dual"));
    bopts.warm_start = &dual.net;
  }
  return interval_from_draws(run_bootstrap(x, opts.T, cfg, derive_seed(opts.seed, "bootstrap"), bopts),
                             alpha);
}

/// q_breve = min over r of q_X(1 - r alpha) + q_Y(1 - (1 - r) alpha), the
/// quantiles taken of sqrt(lambda) Z_X and sqrt(1 - lambda) Z_Y.
inline TwoSampleQuantile two_sample_quantile(const BootstrapDraws& draws_x,
                                             const BootstrapDraws& draws_y, double alpha,
                                             const std::vector<double>& r_grid) {
  detail::check_alpha(alpha);
  if (r_grid.empty()) throw InputError("r_grid must be nonempty");
  TwoSampleQuantile q;
  const double n = static_cast<double>(draws_x.n);
  const double m = static_cast<double>(draws_y.n);
  q.lambda = m / (n + m);
  q.rho = n * m / (n + m);
  q.r_grid = r_grid;
  q.q_breve = std::numeric_limits<double>::infinity();
  const double sx = std::sqrt(q.lambda);
  const double sy = std::sqrt(1.0 - q.lambda);
  for (double r : r_grid) {
    if (!(r > 0.0 && r < 1.0)) throw InputError("r_grid entries must lie in (0, 1)");
    const double v = sx * empirical_quantile(draws_x, 1.0 - r * alpha) +
                     sy * empirical_quantile(draws_y, 1.0 - (1.0 - r) * alpha);
    q.per_r_values.push_back(v);
    q.q_breve = std::min(q.q_breve, v);
  }
  return q;
}

/// Decision of the two-sample test given a trained distance and both
/// bootstrap distributions.
inline TwoSampleResult two_sample_decision(double raw_distance, const BootstrapDraws& draws_x,
                                           const BootstrapDraws& draws_y, double alpha,
                                           const std::vector<double>& r_grid) {
  TwoSampleResult out;
  out.quantile = two_sample_quantile(draws_x, draws_y, alpha, r_grid);
  TestReport& r = out.report;
  r.n = draws_x.n;
  r.m = draws_y.n;
  r.S = {draws_x.S, draws_y.S};
  r.T = draws_x.T;
  r.alpha = alpha;
  r.raw_distance = raw_distance;
  r.scaling = std::sqrt(out.quantile.rho / static_cast<double>(std::min(draws_x.S, draws_y.S)));
  r.statistic = r.scaling * raw_distance;
  r.quantile = out.quantile.q_breve;
  r.decision = r.statistic >= r.quantile ? Decision::Reject : Decision::Accept;
  // Diagnostic p-value against the pooled null sqrt(lambda) Z_X + sqrt(1-lambda) Z_Y
  // with draws paired by rank.
  std::vector<double> pooled;
  const std::size_t k = std::min(draws_x.draws.size(), draws_y.draws.size());
  for (std::size_t i = 0; i < k; ++i) {
    pooled.push_back(std::sqrt(out.quantile.lambda) * draws_x.draws[i] +
                     std::sqrt(1.0 - out.quantile.lambda) * draws_y.draws[i]);
  }
  r.p_value = pooled.empty() ? 0.0 : detail::exceedance_fraction(pooled, r.statistic);
  return out;
}

/// Test of H0: mu = nu from samples x ~ mu and y ~ nu. The distance critic uses
/// cfg_x; each bootstrap uses its own sample's configuration.
inline TwoSampleResult two_sample_test(const Sample& x, const Sample& y, double alpha,
                                       const TrainConfig& cfg_x, const TrainConfig& cfg_y,
                                       const TestOptions& opts,
                                       const std::vector<double>& r_grid = default_r_grid()) {
  require_same_dim(x, y);
  detail::check_alpha(alpha);
  cfg_x.validate();
  cfg_y.validate();
  const DualEstimate dual = train_dual_critic(x, y, detail::seeded(cfg_x, opts.seed, "dual"));
  BootstrapOptions bopts{opts.threads, opts.warm_start ? &dual.net : nullptr};
  const BootstrapDraws dx = run_bootstrap(x, opts.T, cfg_x, derive_seed(opts.seed, "bootstrap-x"), bopts);
  const BootstrapDraws dy = run_bootstrap(y, opts.T, cfg_y, derive_seed(opts.seed, "bootstrap-y"), bopts);
  TwoSampleResult out = two_sample_decision(dual.value, dx, dy, alpha, r_grid);
  out.report.seed = opts.seed;
  out.report.config_digest = opts.config_digest;
  return out;
}

// ---------------------------------------------------------------------------

struct BudgetReport {
  bool admissible = false;
  double lower = 0.0;
  double upper = 0.0;
};

/// Advisory check of n^{2d/(3+2d)} (ln n)^{1/3} < S < n / (ln n)^6 with unit
/// constants.
inline BudgetReport check_parameter_budget(std::size_t n, std::size_t d, std::size_t S) {
  if (n < 3) throw InputError("budget check needs n >= 3");
  if (d < 1) throw InputError("budget check needs d >= 1");
  const double nn = static_cast<double>(n);
  const double dd = static_cast<double>(d);
  const double ln = std::log(nn);
  BudgetReport r;
  r.lower = std::pow(nn, 2.0 * dd / (3.0 + 2.0 * dd)) * std::cbrt(ln);
  r.upper = nn / std::pow(ln, 6.0);
  const double s = static_cast<double>(S);
  r.admissible = S > 0 && r.lower < s && s < r.upper;
  return r;
}

// ---------------------------------------------------------------------------
// Simulation diagnostics

struct AntiConcentrationRow {
  double delta = 0.0;
  double r = 0.0;
  std::size_t count = 0;
  double c_r = 0.0;
};

/// Exact W(mu_n, mu_m) draws: each rep uses fresh samples of sizes n and m.
/// Samples are used as generated (no unit-box map) when `raw` is set.
inline std::vector<double> simulate_exact_distances(const DistSpec& spec, std::size_t n,
                                                    std::size_t m, std::size_t reps,
                                                    std::uint64_t seed, bool raw,
                                                    std::size_t threads = 0) {
  return parallel_map(reps, threads, [&](std::size_t rep) {
    const std::uint64_t s = derive_seed(seed, rep);
    const Sample a = raw ? generate(spec, n, derive_seed(s, "x")) : generate_unit_box(spec, n, derive_seed(s, "x"));
    const Sample b = raw ? generate(spec, m, derive_seed(s, "y")) : generate_unit_box(spec, m, derive_seed(s, "y"));
    return wasserstein1_exact(a, b);
  });
}

/// C_r = #{r <= W <= r + delta} / (reps * delta) on the grid r = min W + k delta.
inline std::vector<AntiConcentrationRow> anti_concentration_table(std::vector<double> w,
                                                                  const std::vector<double>& deltas) {
  if (w.empty()) throw InputError("no distance draws");
  std::sort(w.begin(), w.end());
  std::vector<AntiConcentrationRow> rows;
  const double lo = w.front();
  const double hi = w.back();
  const double reps = static_cast<double>(w.size());
  for (double delta : deltas) {
    if (!(delta > 0.0 && delta < 1.0)) throw InputError("deltas must lie in (0, 1)");
    for (std::size_t k = 0;; ++k) {
      const double r = lo + static_cast<double>(k) * delta;
      if (k > 0 && r > hi) break;
      const auto first = std::lower_bound(w.begin(), w.end(), r);
      const auto last = std::upper_bound(w.begin(), w.end(), r + delta);
      const auto count = static_cast<std::size_t>(last - first);
      rows.push_back({delta, r, count, static_cast<double>(count) / (reps * delta)});
    }
  }
  return rows;
}

inline std::vector<AntiConcentrationRow> anti_concentration_diagnostic(
    const DistSpec& spec, std::size_t n, std::size_t reps, std::size_t m_ref,
    const std::vector<double>& deltas, std::uint64_t seed, std::size_t threads = 0) {
  if (reps < 50) throw InputError("anti-concentration diagnostic needs reps >= 50");
  if (deltas.empty()) throw InputError("deltas must be nonempty");
  return anti_concentration_table(simulate_exact_distances(spec, n, m_ref, reps, seed, true, threads),
                                  deltas);
}

struct QqOptions {
  std::size_t m = 0;  // reference sample size, 0 = n
  std::size_t budget = kDefaultTransportBudget;
  std::size_t threads = 0;
};

/// reps values of sqrt(n/S) W(mu_n, mu_m) on unit-box data, W exact when the
/// transport problem fits the budget and the dual estimate otherwise.
inline std::vector<double> qq_reference(const DistSpec& spec, std::size_t n, std::size_t reps,
                                        std::uint64_t seed, const TrainConfig& cfg,
                                        const QqOptions& opts = {}) {
  if (reps < 2) throw InputError("qq_reference needs reps >= 2");
  const std::size_t m = opts.m == 0 ? n : opts.m;
  const double scaling =
      std::sqrt(static_cast<double>(n) / static_cast<double>(architecture_size(spec.d, cfg)));
  const bool exact = spec.d == 1 || n * m <= opts.budget;
  return parallel_map(reps, opts.threads, [&](std::size_t rep) {
    const std::uint64_t s = derive_seed(seed, rep);
    const Sample a = generate_unit_box(spec, n, derive_seed(s, "x"));
    const Sample b = generate_unit_box(spec, m, derive_seed(s, "y"));
    const double w = exact ? wasserstein1_exact(a, b, opts.budget)
                           : train_dual_critic(a, b, detail::seeded(cfg, s, "dual")).value;
    return scaling * w;
  });
}

/// Two-sample Kolmogorov-Smirnov statistic sup_t |F_a(t) - F_b(t)|.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw InputError("ks_statistic needs nonempty inputs");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double best = 0.0;
  while (i < a.size() && j < b.size()) {
    const double t = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= t) ++i;
    while (j < b.size() && b[j] <= t) ++j;
    best = std::max(best, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return best;
}

}  // namespace wtest
