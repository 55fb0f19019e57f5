#pragma once

// Gaussian multiplier bootstrap for the scaled empirical Wasserstein
// distance. One draw is
//   Z = sup_f sqrt(1/(nS)) sum_i xi_i (f(X_i) - mean_j f(X_j)),  xi_i ~ N(0,1),
// with the supremum taken over spectrally normalized critics.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "wtest/error.hpp"
#include "wtest/nn.hpp"
#include "wtest/parallel.hpp"
#include "wtest/random.hpp"
#include "wtest/sample.hpp"
#include "wtest/trainer.hpp"

namespace wtest {

struct BootstrapDraws {
  std::vector<double> draws;  // ascending
  std::size_t T = 0;
  std::size_t n = 0;
  std::size_t S = 0;
  std::uint64_t seed = 0;
};

struct DrawDetail {
  double value = 0.0;              // scaled draw
  double unscaled_objective = 0.0; // sum_i (xi_i - xi_bar) f(X_i) at the maximizer
  std::size_t S = 0;
};

/// Parameter count of the critic architecture `cfg` builds for dimension d.
inline std::size_t architecture_size(std::size_t d, const TrainConfig& cfg) {
  std::size_t s = 0;
  std::size_t in = d;
  for (int w : cfg.hidden_widths) {
    s += static_cast<std::size_t>(w) * (in + 1);
    in = static_cast<std::size_t>(w);
  }
  return s + in + 1;
}

/// One draw for given multipliers. Centering f is the same as centering the
/// multipliers, so the ascent runs on weights sqrt(1/(nS)) (xi_i - xi_bar).
inline DrawDetail bootstrap_draw_with_multipliers(const Sample& x, const Eigen::VectorXd& xi,
                                                  const TrainConfig& cfg, Rng& rng,
                                                  const CriticNet* warm_start = nullptr) {
  if (static_cast<std::size_t>(xi.size()) != x.n()) {
    throw ShapeError("need one multiplier per observation");
  }
  DrawDetail out;
  out.S = architecture_size(x.d(), cfg);
  if (x.n() < 2) return out;  // centering annihilates a single term

  const Eigen::VectorXd centered = xi.array() - xi.mean();
  const double scale = std::sqrt(1.0 / (static_cast<double>(x.n()) * static_cast<double>(out.S)));
  WeightedFit fit = maximize_weighted_objective(x.data(), scale * centered, cfg, rng, warm_start);
  out.value = fit.objective;
  out.unscaled_objective = fit.net.forward_batch(x.data()).dot(centered);
  return out;
}

/// Draws xi ~ N(0,1)^n from `rng`, then maximizes.
inline double bootstrap_draw(const Sample& x, const TrainConfig& cfg, Rng& rng,
                             const CriticNet* warm_start = nullptr) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd xi(static_cast<Eigen::Index>(x.n()));
  for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = normal(rng);
  return bootstrap_draw_with_multipliers(x, xi, cfg, rng, warm_start).value;
}

struct BootstrapOptions {
  std::size_t threads = 0;                // 0 = hardware concurrency
  const CriticNet* warm_start = nullptr;  // fresh initialization per draw when null
};

/// T independent draws; draw t uses the stream derived from (seed, t), so the
/// result does not depend on the worker count.
inline BootstrapDraws run_bootstrap(const Sample& x, std::size_t T, const TrainConfig& cfg,
                                    std::uint64_t seed, const BootstrapOptions& opts = {}) {
  if (T < 1) throw InputError("bootstrap needs T >= 1");
  cfg.validate();
  BootstrapDraws out;
  out.T = T;
  out.n = x.n();
  out.S = architecture_size(x.d(), cfg);
  out.seed = seed;
  out.draws = parallel_map(T, opts.threads, [&](std::size_t t) {
    Rng rng = make_stream(seed, t);
    try {
      return bootstrap_draw(x, cfg, rng, opts.warm_start);
    } catch (const NumericError& e) {
      throw NumericError("bootstrap draw " + std::to_string(t) + ": " + e.what());
    }
  });
  std::sort(out.draws.begin(), out.draws.end());
  return out;
}

/// The ceil(level * T)-th order statistic (1-indexed).
inline double empirical_quantile(const std::vector<double>& sorted_draws, double level) {
  if (sorted_draws.empty()) throw InputError("empirical_quantile: no draws");
  if (!(level > 0.0 && level < 1.0)) throw InputError("quantile level must lie in (0, 1)");
  const double T = static_cast<double>(sorted_draws.size());
  // Guard against level * T landing a few ulps above an integer.
  auto k = static_cast<std::size_t>(std::ceil(level * T - 1e-9));
  k = std::clamp<std::size_t>(k, 1, sorted_draws.size());
  return sorted_draws[k - 1];
}

inline double empirical_quantile(const BootstrapDraws& draws, double level) {
  return empirical_quantile(draws.draws, level);
}

}  // namespace wtest
